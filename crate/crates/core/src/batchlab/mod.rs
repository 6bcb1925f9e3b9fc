//! Batch-size calculus: steps/tokens-to-loss curves, token-optimal batch
//! size, token ratio and advantage, the two-segment critical-batch model,
//! and the simulated compute/time Pareto frontier.

mod curve;
mod piecewise;
mod tradeoff;

pub use curve::{
    build_sweep_curve, steps_to_loss, token_advantage, token_optimal_batch, token_ratio, RatioPoint, SweepCurve,
    SweepPoint,
};
pub use piecewise::{
    fit_piecewise, ratio_log_slope, ratio_model, slope_minus_one_check, FitWarning, PiecewiseFit, SlopeReport,
    SLOPE_TOL,
};
pub use tradeoff::{
    frontier_dominates, pareto_frontier, pareto_indices, tradeoff_points, CostModel, DeviceTier, TradeoffPoint,
};

/// Default relative tolerance of [`token_optimal_batch`].
pub const TOKEN_OPT_REL_TOL: f64 = 0.005;
