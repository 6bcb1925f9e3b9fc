//! Muon optimizer workbench: Newton-Schulz orthogonalization, muP width
//! transfer with telescoping sweeps, and batch-size / token-efficiency
//! analysis, all exercised on a deterministic desk-scale training task.

pub mod batchlab;
pub mod error;
pub mod matops;
pub mod model;
pub mod mup;
pub mod optim;
pub mod telescope;

pub use error::{Error, Result};
