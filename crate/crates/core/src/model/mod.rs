//! Desk-scale training substrate: a hand-differentiated tanh MLP trained on
//! a seeded teacher-student regression stream.

mod mlp;
mod task;
mod train;

pub use mlp::{backward, forward, mse, Activation, Activations, Batch, MlpParams, MlpSpec};
pub use task::{DataStream, TaskSpec, Teacher};
pub use train::{
    train, LossTrace, OptimizerConfig, RunConfig, ScheduleConfig, TraceSample, Trainer, EMA_COEFFICIENT,
};
