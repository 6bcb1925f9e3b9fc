use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear warmup from zero followed by cosine decay to `final_fraction · max_lr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub max_lr: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub final_fraction: f64,
}

impl LrSchedule {
    pub fn new(max_lr: f64, warmup_steps: u64, total_steps: u64) -> Result<Self> {
        let s = Self {
            max_lr,
            warmup_steps,
            total_steps,
            final_fraction: 0.1,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_lr > 0.0 && self.max_lr.is_finite()) {
            return Err(Error::InvalidInput(format!("max_lr must be > 0, got {}", self.max_lr)));
        }
        if self.total_steps <= self.warmup_steps {
            return Err(Error::InvalidInput(format!(
                "total_steps ({}) must exceed warmup_steps ({})",
                self.total_steps, self.warmup_steps
            )));
        }
        if !(0.0..=1.0).contains(&self.final_fraction) {
            return Err(Error::InvalidInput(format!(
                "final_fraction must lie in [0, 1], got {}",
                self.final_fraction
            )));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> Result<f64> {
        if step > self.total_steps {
            return Err(Error::InvalidInput(format!(
                "step {step} is past the end of the schedule ({})",
                self.total_steps
            )));
        }
        if step < self.warmup_steps {
            return Ok(self.max_lr * step as f64 / self.warmup_steps as f64);
        }
        let progress =
            (step - self.warmup_steps) as f64 / (self.total_steps - self.warmup_steps) as f64;
        let cosine = 0.5 * (1.0 + (PI * progress).cos());
        Ok(self.max_lr * (self.final_fraction + (1.0 - self.final_fraction) * cosine))
    }
}

pub fn schedule_lr(sched: &LrSchedule, step: u64) -> Result<f64> {
    sched.lr_at(step)
}
