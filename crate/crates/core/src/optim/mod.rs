//! Optimizer kernels: Muon, AdamW, the point-estimate Shampoo/Soap
//! reductions, the learning-rate schedule, and parameter labeling.

mod adamw;
mod checkpoint;
mod muon;
mod reduction;
mod schedule;

pub use adamw::{adamw_update, AdamHyper, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, OptimizerState};
pub use muon::{muon_update, muon_update_with, MuonHyper, MuonState};
pub use reduction::{shampoo_point_update, soap_point_update};
pub use schedule::{schedule_lr, LrSchedule};

use serde::{Deserialize, Serialize};

/// Which optimizer a parameter is routed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamLabel {
    Muon,
    Adam,
}

/// Path components that route a parameter to Adam.
const ADAM_MARKERS: [&str; 3] = ["norm", "logits", "embedding"];

/// Labels a parameter from its `/`-separated path. Normalization, embedding
/// and output-logits parameters go to Adam; every other matrix to Muon.
pub fn label_for_path(path: &str) -> ParamLabel {
    let adam = path
        .split('/')
        .any(|component| ADAM_MARKERS.iter().any(|m| component.contains(m)));
    if adam {
        ParamLabel::Adam
    } else {
        ParamLabel::Muon
    }
}
