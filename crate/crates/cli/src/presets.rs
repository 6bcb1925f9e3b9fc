//! Reference toy configurations shared by `check` and the test suites.

use muonbench_core::model::{Activation, MlpSpec, OptimizerConfig, RunConfig, ScheduleConfig, TaskSpec};
use muonbench_core::optim::{AdamHyper, MuonHyper};

pub fn adamw() -> OptimizerConfig {
    OptimizerConfig::Adamw { adam: AdamHyper::default() }
}

pub fn muon() -> OptimizerConfig {
    OptimizerConfig::Muon {
        muon: MuonHyper::default(),
        adam: AdamHyper::default(),
    }
}

/// One-hidden-layer student on a 64-input teacher of width 2048 (4× the
/// widest student used in transfer checks), noiseless, 150 steps at B=128
/// with a fixed 1024-sample evaluation batch.
///
/// Depth 1 is deliberate: at this scale deeper students put the muP optimum
/// right at the edge of a steep loss cliff, so the argmin wanders across
/// widths for reasons unrelated to the parameterization.
pub fn transfer_run(width: usize, mup: bool, optimizer: OptimizerConfig, log10_lr: f64) -> RunConfig {
    let steps = 150;
    RunConfig {
        model: MlpSpec {
            input_dim: 64,
            output_dim: 4,
            hidden_width: width,
            depth: 1,
            activation: Activation::Tanh,
            mup,
        },
        task: TaskSpec {
            teacher_seed: 1,
            data_seed: 2,
            noise_std: 0.0,
            tokens_per_sample: 1,
            teacher_width: 2048,
        },
        optimizer,
        schedule: ScheduleConfig {
            max_lr: 10f64.powf(log10_lr),
            warmup_steps: steps / 10,
            final_fraction: 0.1,
        },
        batch_size: 128,
        total_steps: steps,
        eval_every: steps,
        run_seed: 3,
        eval_batch: Some(1024),
    }
}

/// Small two-hidden-layer student for coordinate checks and sweeps.
pub fn small_run(width: usize, optimizer: OptimizerConfig, max_lr: f64) -> RunConfig {
    RunConfig {
        model: MlpSpec {
            input_dim: 16,
            output_dim: 4,
            hidden_width: width,
            depth: 2,
            activation: Activation::Tanh,
            mup: true,
        },
        task: TaskSpec {
            teacher_seed: 11,
            data_seed: 12,
            noise_std: 0.0,
            tokens_per_sample: 1,
            teacher_width: 256,
        },
        optimizer,
        schedule: ScheduleConfig {
            max_lr,
            warmup_steps: 5,
            final_fraction: 0.1,
        },
        batch_size: 32,
        total_steps: 50,
        eval_every: 1,
        run_seed: 13,
        eval_batch: None,
    }
}
