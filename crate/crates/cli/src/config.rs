//! JSON job configs. Parsing reports the JSON path of the first bad field.

use std::fs;
use std::path::Path;

use muonbench_core::batchlab::{CostModel, TOKEN_OPT_REL_TOL};
use muonbench_core::model::{OptimizerConfig, RunConfig};
use muonbench_core::telescope::TelescopeConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn parse_json<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(path, e.into_inner().to_string())
    })
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    parse_json(&text)
}

pub fn check_run_config(cfg: &RunConfig, prefix: &str) -> CliResult<()> {
    cfg.validate().map_err(|(path, e)| {
        let full = if prefix.is_empty() { path } else { format!("{prefix}.{path}") };
        CliError::config(full, e.to_string())
    })
}

pub fn load_run_config(path: &Path) -> CliResult<RunConfig> {
    let cfg: RunConfig = load_json(path)?;
    check_run_config(&cfg, "")?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptimizer {
    pub name: String,
    pub optimizer: OptimizerConfig,
    pub max_lr: f64,
}

/// Batch-size sweep: every optimizer at every batch size, analysed at every
/// threshold. The first optimizer is the baseline (`A`) of ratio and
/// advantage, the second the candidate (`M`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Template run; optimizer, batch size, steps and lr are set per cell.
    pub base: RunConfig,
    pub optimizers: Vec<SweepOptimizer>,
    /// Batch sizes in samples.
    pub batch_sizes: Vec<usize>,
    pub thresholds: Vec<f64>,
    /// Samples seen by every run; steps = budget / batch size (rounded up).
    pub sample_budget: u64,
    /// Loss samples recorded per run.
    #[serde(default = "default_trace_points")]
    pub trace_points: u64,
    /// `max_lr · (B / B₀)^exponent` with `B₀` the smallest batch size.
    #[serde(default)]
    pub lr_batch_exponent: f64,
    #[serde(default = "default_rel_tol")]
    pub token_opt_rel_tol: f64,
    /// Defaults to the standard tier shape starting at the smallest batch.
    #[serde(default)]
    pub cost_model: Option<CostModel>,
}

fn default_trace_points() -> u64 {
    200
}

fn default_rel_tol() -> f64 {
    TOKEN_OPT_REL_TOL
}

impl SweepConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.optimizers.len() != 2 {
            return Err(CliError::config(
                "optimizers",
                format!("exactly 2 optimizers (baseline, candidate) are required, got {}", self.optimizers.len()),
            ));
        }
        if self.optimizers[0].name == self.optimizers[1].name {
            return Err(CliError::config("optimizers[1].name", "optimizer names must differ"));
        }
        for (i, o) in self.optimizers.iter().enumerate() {
            if !(o.max_lr > 0.0 && o.max_lr.is_finite()) {
                return Err(CliError::config(format!("optimizers[{i}].max_lr"), format!("must be > 0, got {}", o.max_lr)));
            }
            if o.name.is_empty() || !o.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(CliError::config(format!("optimizers[{i}].name"), "use [A-Za-z0-9_-]+"));
            }
            o.optimizer
                .validate()
                .map_err(|e| CliError::config(format!("optimizers[{i}].optimizer"), e.to_string()))?;
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.windows(2).any(|w| w[0] >= w[1]) || self.batch_sizes[0] == 0 {
            return Err(CliError::config("batch_sizes", "must be non-empty, positive and strictly increasing"));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !t.is_finite()) {
            return Err(CliError::config("thresholds", "must be a non-empty list of finite losses"));
        }
        if self.sample_budget == 0 {
            return Err(CliError::config("sample_budget", "must be >= 1"));
        }
        if self.trace_points == 0 {
            return Err(CliError::config("trace_points", "must be >= 1"));
        }
        if !(self.token_opt_rel_tol >= 0.0) {
            return Err(CliError::config("token_opt_rel_tol", "must be >= 0"));
        }
        if let Some(c) = &self.cost_model {
            c.validate().map_err(|e| CliError::config("cost_model", e.to_string()))?;
        }
        for cell in self.cells() {
            check_run_config(&cell.config, "base")?;
        }
        Ok(())
    }

    /// One run config per (optimizer, batch size), optimizer-major.
    pub fn cells(&self) -> Vec<SweepCell> {
        let b0 = self.batch_sizes[0] as f64;
        let mut out = Vec::new();
        for (oi, o) in self.optimizers.iter().enumerate() {
            for &b in &self.batch_sizes {
                let steps = self.sample_budget.div_ceil(b as u64);
                let mut cfg = self.base;
                cfg.optimizer = o.optimizer;
                cfg.batch_size = b;
                cfg.total_steps = steps;
                cfg.eval_every = (steps / self.trace_points).max(1);
                cfg.schedule.max_lr = o.max_lr * (b as f64 / b0).powf(self.lr_batch_exponent);
                if cfg.schedule.warmup_steps >= steps {
                    cfg.schedule.warmup_steps = steps / 10;
                }
                out.push(SweepCell {
                    optimizer: oi,
                    batch_size: b,
                    config: cfg,
                });
            }
        }
        out
    }

    pub fn cost_model(&self) -> CostModel {
        self.cost_model
            .clone()
            .unwrap_or_else(|| CostModel::scaled(self.batch_sizes[0] as u64 * self.base.task.tokens_per_sample * 2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub optimizer: usize,
    pub batch_size: usize,
    pub config: RunConfig,
}

/// Hyperparameters a telescope coordinate can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// `max_lr = 10^x`.
    Log10Lr,
    /// Weight decay of every optimizer `= 10^x`.
    Log10WeightDecay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelescopeJob {
    /// Template run; width, steps and swept hyperparameters are set per point.
    /// muP is always enabled.
    pub base: RunConfig,
    pub telescope: TelescopeConfig,
    /// One entry per `telescope.ranges` entry.
    #[serde(default = "default_params")]
    pub params: Vec<SweepParam>,
}

fn default_params() -> Vec<SweepParam> {
    vec![SweepParam::Log10Lr, SweepParam::Log10WeightDecay]
}

impl TelescopeJob {
    pub fn validate(&self) -> CliResult<()> {
        self.telescope
            .validate()
            .map_err(|e| CliError::config("telescope", e.to_string()))?;
        if self.params.len() != self.telescope.ranges.len() {
            return Err(CliError::config(
                "params",
                format!(
                    "{} params for {} ranges",
                    self.params.len(),
                    self.telescope.ranges.len()
                ),
            ));
        }
        if self.params.iter().enumerate().any(|(i, p)| self.params[..i].contains(p)) {
            return Err(CliError::config("params", "each hyperparameter may appear once"));
        }
        let probe = self.run_config(self.telescope.base_width, &vec![0.0; self.params.len()], self.telescope.steps);
        check_run_config(&probe, "base")
    }

    pub fn run_config(&self, width: usize, point: &[f64], steps: u64) -> RunConfig {
        let mut cfg = self.base;
        cfg.model.hidden_width = width;
        cfg.model.mup = true;
        cfg.total_steps = steps;
        cfg.eval_every = cfg.eval_every.min(steps.max(1));
        if cfg.schedule.warmup_steps >= steps {
            cfg.schedule.warmup_steps = steps / 10;
        }
        for (p, &x) in self.params.iter().zip(point) {
            match p {
                SweepParam::Log10Lr => cfg.schedule.max_lr = 10f64.powf(x),
                SweepParam::Log10WeightDecay => cfg.optimizer = cfg.optimizer.with_weight_decay(10f64.powf(x)),
            }
        }
        cfg
    }
}
