use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mlp::{backward, forward, Batch, MlpParams, MlpSpec};
use super::task::{DataStream, TaskSpec, Teacher};
use crate::error::{Error, Result};
use crate::matops::Matrix;
use crate::optim::{
    adamw_update, label_for_path, muon_update, AdamHyper, AdamState, LrSchedule, MuonHyper,
    MuonState, OptimizerState, ParamLabel,
};

/// EMA coefficient applied to raw losses.
pub const EMA_COEFFICIENT: f64 = 0.95;

/// Seed offset separating the held-out evaluation stream from training data.
const EVAL_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerConfig {
    /// AdamW on every parameter.
    Adamw {
        #[serde(default)]
        adam: AdamHyper,
    },
    /// Muon on matrix parameters, AdamW on the Adam-labeled ones.
    Muon {
        #[serde(default)]
        muon: MuonHyper,
        #[serde(default)]
        adam: AdamHyper,
    },
}

impl OptimizerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerConfig::Adamw { .. } => "adamw",
            OptimizerConfig::Muon { .. } => "muon",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerConfig::Adamw { adam } => adam.validate(),
            OptimizerConfig::Muon { muon, adam } => {
                muon.validate()?;
                adam.validate()
            }
        }
    }

    /// Sets the weight decay on every optimizer in the config.
    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        match &mut self {
            OptimizerConfig::Adamw { adam } => adam.weight_decay = wd,
            OptimizerConfig::Muon { muon, adam } => {
                muon.weight_decay = wd;
                adam.weight_decay = wd;
            }
        }
        self
    }
}

/// Schedule shape; the step count comes from the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub max_lr: f64,
    #[serde(default)]
    pub warmup_steps: u64,
    #[serde(default = "default_final_fraction")]
    pub final_fraction: f64,
}

fn default_final_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: MlpSpec,
    pub task: TaskSpec,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleConfig,
    pub batch_size: usize,
    pub total_steps: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    pub run_seed: u64,
    /// Size of a fixed held-out evaluation batch. When absent, each sample
    /// records the loss on the fresh batch about to be trained on.
    #[serde(default)]
    pub eval_batch: Option<usize>,
}

fn default_eval_every() -> u64 {
    1
}

impl RunConfig {
    /// Checks every field, reporting the offending path on failure.
    pub fn validate(&self) -> std::result::Result<(), (String, Error)> {
        fn at(path: &'static str) -> impl Fn(Error) -> (String, Error) {
            move |e| (path.to_string(), e)
        }
        self.model.validate().map_err(at("model"))?;
        self.task.validate().map_err(at("task"))?;
        self.optimizer.validate().map_err(at("optimizer"))?;
        if !(self.schedule.max_lr > 0.0 && self.schedule.max_lr.is_finite()) {
            return Err((
                "schedule.max_lr".into(),
                Error::InvalidInput(format!("must be > 0, got {}", self.schedule.max_lr)),
            ));
        }
        if !(0.0..=1.0).contains(&self.schedule.final_fraction) {
            return Err((
                "schedule.final_fraction".into(),
                Error::InvalidInput(format!("must lie in [0, 1], got {}", self.schedule.final_fraction)),
            ));
        }
        if self.total_steps > 0 && self.schedule.warmup_steps >= self.total_steps {
            return Err((
                "schedule.warmup_steps".into(),
                Error::InvalidInput(format!(
                    "must be below total_steps ({}), got {}",
                    self.total_steps, self.schedule.warmup_steps
                )),
            ));
        }
        if self.batch_size == 0 {
            return Err(("batch_size".into(), Error::InvalidInput("must be >= 1".into())));
        }
        if self.eval_every == 0 {
            return Err(("eval_every".into(), Error::InvalidInput("must be >= 1".into())));
        }
        if self.eval_batch == Some(0) {
            return Err(("eval_batch".into(), Error::InvalidInput("must be >= 1".into())));
        }
        Ok(())
    }

    pub fn lr_schedule(&self) -> Option<LrSchedule> {
        (self.total_steps > 0).then_some(LrSchedule {
            max_lr: self.schedule.max_lr,
            warmup_steps: self.schedule.warmup_steps,
            total_steps: self.total_steps,
            final_fraction: self.schedule.final_fraction,
        })
    }

    /// Tokens consumed per optimizer step.
    pub fn batch_tokens(&self) -> u64 {
        self.batch_size as u64 * self.task.tokens_per_sample
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub step: u64,
    pub tokens: u64,
    pub raw: f64,
    pub smoothed: f64,
}

/// Sampled loss curve of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub batch_tokens: u64,
    pub samples: Vec<TraceSample>,
    #[serde(default)]
    pub diverged: bool,
}

impl LossTrace {
    pub fn new(batch_tokens: u64) -> Self {
        Self {
            batch_tokens,
            samples: Vec::new(),
            diverged: false,
        }
    }

    /// Appends a raw loss, extending the EMA.
    pub fn push(&mut self, step: u64, raw: f64) {
        let smoothed = match self.samples.last() {
            Some(prev) => EMA_COEFFICIENT * prev.smoothed + (1.0 - EMA_COEFFICIENT) * raw,
            None => raw,
        };
        self.samples.push(TraceSample {
            step,
            tokens: step * self.batch_tokens,
            raw,
            smoothed,
        });
    }

    /// Builds a trace from `(step, raw)` pairs.
    pub fn from_raw(batch_tokens: u64, points: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let mut t = Self::new(batch_tokens);
        for (step, raw) in points {
            t.push(step, raw);
        }
        t
    }

    pub fn min_smoothed(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.smoothed).min_by(f64::total_cmp)
    }

    pub fn final_smoothed(&self) -> Option<f64> {
        self.samples.last().map(|s| s.smoothed)
    }

    /// Checks step ordering, token accounting, and the EMA recurrence.
    pub fn validate(&self) -> Result<()> {
        for (k, s) in self.samples.iter().enumerate() {
            if s.tokens != s.step * self.batch_tokens {
                return Err(Error::InvalidInput(format!("sample {k}: tokens != step * batch_tokens")));
            }
            let expected = if k == 0 {
                s.raw
            } else {
                let prev = &self.samples[k - 1];
                if s.step <= prev.step {
                    return Err(Error::InvalidInput(format!("sample {k}: steps not increasing")));
                }
                EMA_COEFFICIENT * prev.smoothed + (1.0 - EMA_COEFFICIENT) * s.raw
            };
            if expected.to_bits() != s.smoothed.to_bits() {
                return Err(Error::InvalidInput(format!("sample {k}: smoothed loss is not the EMA")));
            }
        }
        Ok(())
    }
}

/// Stateful single-run trainer; [`train`] drives it to completion.
pub struct Trainer {
    config: RunConfig,
    schedule: Option<LrSchedule>,
    params: MlpParams,
    states: Vec<OptimizerState>,
    stream: DataStream,
    eval: Option<Batch>,
    step: u64,
}

impl Trainer {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate().map_err(|(path, e)| match e {
            Error::InvalidInput(msg) => Error::InvalidInput(format!("{path}: {msg}")),
            other => other,
        })?;
        let teacher = Arc::new(Teacher::new(&config.task, config.model.input_dim, config.model.output_dim));
        let stream = DataStream::new(&config.task, teacher.clone());
        let eval = config.eval_batch.map(|n| {
            DataStream::with_seed(&config.task, teacher, config.task.data_seed ^ EVAL_STREAM_SALT)
                .next_batch(n, 0)
        });
        let params = config.model.init_params(config.run_seed);
        let states = params
            .layers
            .iter()
            .enumerate()
            .map(|(l, w)| {
                let (r, c) = w.shape();
                match (config.optimizer, Self::label(&config.model, l)) {
                    (OptimizerConfig::Muon { .. }, ParamLabel::Muon) => OptimizerState::Muon(MuonState::new(r, c)),
                    _ => OptimizerState::Adam(AdamState::new(r, c)),
                }
            })
            .collect();
        Ok(Self {
            config: *config,
            schedule: config.lr_schedule(),
            params,
            states,
            stream,
            eval,
            step: 0,
        })
    }

    pub fn label(spec: &MlpSpec, layer: usize) -> ParamLabel {
        label_for_path(&spec.layer_path(layer))
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn states(&self) -> &[OptimizerState] {
        &self.states
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn next_batch(&mut self) -> Batch {
        self.stream.next_batch(self.config.batch_size, self.step)
    }

    /// Loss of the current parameters on the fixed evaluation batch, if any.
    pub fn eval_loss(&self) -> Option<Result<f64>> {
        self.eval.as_ref().map(|b| {
            let b = Batch { step: self.step, ..b.clone() };
            forward(&self.config.model, &self.params, &b).map(|(_, l)| l)
        })
    }

    /// Applies one update from `batch`, returning the pre-update loss on it.
    pub fn apply(&mut self, batch: &Batch) -> Result<f64> {
        let spec = &self.config.model;
        let (acts, loss) = forward(spec, &self.params, batch)?;
        let grads = backward(spec, &self.params, &acts, batch)?;
        let lr = match &self.schedule {
            Some(s) => s.lr_at(self.step)?,
            None => 0.0,
        };
        for (l, grad) in grads.iter().enumerate() {
            let layer_lr = lr * spec.scaling(l).lr_scale;
            let w = &self.params.layers[l];
            let (new_w, new_state) = match (&self.states[l], &self.config.optimizer) {
                (OptimizerState::Muon(s), OptimizerConfig::Muon { muon, .. }) => {
                    let (w, s) = muon_update(w, grad, s, muon, layer_lr)?;
                    (w, OptimizerState::Muon(s))
                }
                (OptimizerState::Adam(s), OptimizerConfig::Muon { adam, .. })
                | (OptimizerState::Adam(s), OptimizerConfig::Adamw { adam }) => {
                    let (w, s) = adamw_update(w, grad, s, adam, layer_lr)?;
                    (w, OptimizerState::Adam(s))
                }
                (OptimizerState::Muon(_), OptimizerConfig::Adamw { .. }) => {
                    unreachable!("muon state is only created for muon runs")
                }
            };
            if !new_w.is_finite() {
                return Err(Error::Divergence { step: self.step });
            }
            self.params.layers[l] = new_w;
            self.states[l] = new_state;
        }
        self.step += 1;
        Ok(loss)
    }

    /// Layer weights as used by the forward pass (`a·w`).
    pub fn effective_weights(&self) -> Vec<Matrix> {
        self.params
            .layers
            .iter()
            .enumerate()
            .map(|(l, w)| w.scale(self.config.model.scaling(l).multiplier))
            .collect()
    }
}

/// Runs `total_steps` updates on fresh batches and records the loss every
/// `eval_every` steps and at the end. Divergence truncates the trace and
/// flags it rather than failing.
pub fn train(config: &RunConfig) -> Result<LossTrace> {
    let mut trainer = Trainer::new(config)?;
    let mut trace = LossTrace::new(config.batch_tokens());
    let record = |step: u64| step % config.eval_every == 0 || step == config.total_steps;

    let outcome = (|| -> Result<()> {
        for step in 0..config.total_steps {
            let batch = trainer.next_batch();
            if record(step) {
                if let Some(eval) = trainer.eval_loss() {
                    trace.push(step, eval?);
                    trainer.apply(&batch)?;
                    continue;
                }
            }
            let loss = trainer.apply(&batch)?;
            if record(step) {
                trace.push(step, loss);
            }
        }
        let loss = match trainer.eval_loss() {
            Some(l) => l?,
            None => {
                let batch = trainer.next_batch();
                forward(&config.model, trainer.params(), &batch)?.1
            }
        };
        trace.push(config.total_steps, loss);
        Ok(())
    })();

    match outcome {
        Ok(()) => Ok(trace),
        Err(Error::Divergence { .. }) | Err(Error::NonFinite(_)) => {
            trace.diverged = true;
            Ok(trace)
        }
        Err(e) => Err(e),
    }
}
