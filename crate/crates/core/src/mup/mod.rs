//! Width scaling: the muP table, coordinate and spectral-norm checks across
//! widths, and the finite-width drift of the optimal hyperparameter.

mod checks;
mod drift;
mod scaling;

pub use checks::{coordinate_check, spectral_check, spread_by_layer, CoordinateRow, SpectralRow};
pub use drift::{
    drift_coefficient, fit_drift, golden_section_min, grid_argmin, grid_points, refine_argmin, DriftFit,
    MeshError, BRANCH_TOL, STATIONARY_TOL,
};
pub use scaling::{scaling_for, standard_scaling, LayerClass, MupScaling};
