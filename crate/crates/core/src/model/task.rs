use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mlp::{apply_layers, Batch};
use crate::error::{Error, Result};
use crate::matops::Matrix;

/// Teacher-student regression task with an infinite, never-repeated sample stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub teacher_seed: u64,
    pub data_seed: u64,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default = "default_tokens_per_sample")]
    pub tokens_per_sample: u64,
    /// Hidden width of the one-layer tanh teacher.
    pub teacher_width: usize,
}

fn default_tokens_per_sample() -> u64 {
    1
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidInput(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if self.tokens_per_sample == 0 {
            return Err(Error::InvalidInput("tokens_per_sample must be >= 1".into()));
        }
        if self.teacher_width == 0 {
            return Err(Error::InvalidInput("teacher_width must be >= 1".into()));
        }
        Ok(())
    }
}

/// `y = W₂ · tanh(W₁ · x)` with `W₁ ~ N(0, 1)` and `W₂ ~ N(0, 1/width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Teacher {
    pub w1: Matrix,
    pub w2: Matrix,
}

impl Teacher {
    pub fn new(task: &TaskSpec, input_dim: usize, output_dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(task.teacher_seed);
        let h = task.teacher_width;
        let w1 = Matrix::random_normal(h, input_dim, 1.0, &mut rng);
        let w2 = Matrix::random_normal(output_dim, h, 1.0 / (h as f64).sqrt(), &mut rng);
        Self { w1, w2 }
    }

    pub fn predict(&self, x: &Matrix) -> Matrix {
        apply_layers(&[&self.w1, &self.w2], &[1.0, 1.0], x).1
    }
}

/// Sequential sample stream. Each sample draws its inputs then its target
/// noise, so batches of any size are contiguous slices of one stream.
pub struct DataStream {
    rng: ChaCha8Rng,
    teacher: Arc<Teacher>,
    input_dim: usize,
    output_dim: usize,
    noise_std: f64,
}

impl DataStream {
    pub fn new(task: &TaskSpec, teacher: Arc<Teacher>) -> Self {
        Self::with_seed(task, teacher, task.data_seed)
    }

    pub fn with_seed(task: &TaskSpec, teacher: Arc<Teacher>, seed: u64) -> Self {
        let input_dim = teacher.w1.cols();
        let output_dim = teacher.w2.rows();
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            teacher,
            input_dim,
            output_dim,
            noise_std: task.noise_std,
        }
    }

    pub fn next_batch(&mut self, size: usize, step: u64) -> Batch {
        let x_std = 1.0 / (self.input_dim as f64).sqrt();
        let mut x = Vec::with_capacity(size * self.input_dim);
        let mut noise = Vec::with_capacity(size * self.output_dim);
        for _ in 0..size {
            for _ in 0..self.input_dim {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                x.push(z * x_std);
            }
            for _ in 0..self.output_dim {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                noise.push(z * self.noise_std);
            }
        }
        let x = Matrix::from_raw(size, self.input_dim, x);
        let clean = self.teacher.predict(&x);
        let y = if self.noise_std > 0.0 {
            clean.add(&Matrix::from_raw(size, self.output_dim, noise))
        } else {
            clean
        };
        Batch { x, y, step }
    }
}
