use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::Matrix;
use crate::mup::{scaling_for, standard_scaling, LayerClass, MupScaling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

/// A bias-free MLP: `input → depth hidden layers (tanh) → linear output`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_width: usize,
    pub depth: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default)]
    pub mup: bool,
}

fn default_activation() -> Activation {
    Activation::Tanh
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("output_dim", self.output_dim),
            ("hidden_width", self.hidden_width),
            ("depth", self.depth),
        ] {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.depth + 1
    }

    /// `(fan_out, fan_in)` of each weight matrix, i.e. its `(rows, cols)`.
    pub fn layer_shape(&self, layer: usize) -> (usize, usize) {
        let n = self.hidden_width;
        if layer == 0 {
            (n, self.input_dim)
        } else if layer == self.depth {
            (self.output_dim, n)
        } else {
            (n, n)
        }
    }

    pub fn layer_class(&self, layer: usize) -> LayerClass {
        if layer == 0 {
            LayerClass::Input
        } else if layer == self.depth {
            LayerClass::Output
        } else {
            LayerClass::Hidden
        }
    }

    /// Parameter path used for optimizer labeling and checkpoints.
    pub fn layer_path(&self, layer: usize) -> String {
        match self.layer_class(layer) {
            LayerClass::Input => "input/weight".to_string(),
            LayerClass::Hidden => format!("hidden_{layer}/weight"),
            LayerClass::Output => "logits/weight".to_string(),
        }
    }

    pub fn scaling(&self, layer: usize) -> MupScaling {
        let (fan_out, fan_in) = self.layer_shape(layer);
        let class = self.layer_class(layer);
        if self.mup {
            scaling_for(class, fan_in, fan_out)
        } else {
            standard_scaling(class, fan_in, fan_out)
        }
    }

    pub fn num_params(&self) -> usize {
        (0..self.num_layers())
            .map(|l| {
                let (r, c) = self.layer_shape(l);
                r * c
            })
            .sum()
    }

    /// Trainable weights drawn from `N(0, b)` per layer.
    pub fn init_params(&self, seed: u64) -> MlpParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..self.num_layers())
            .map(|l| {
                let (rows, cols) = self.layer_shape(l);
                Matrix::random_normal(rows, cols, self.scaling(l).init_variance.sqrt(), &mut rng)
            })
            .collect();
        MlpParams { layers }
    }
}

/// Trainable weights `w`; the forward pass uses `a·w`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Matrix>,
}

impl MlpParams {
    pub fn check_against(&self, spec: &MlpSpec) -> Result<()> {
        if self.layers.len() != spec.num_layers() {
            return Err(Error::InvalidInput(format!(
                "expected {} weight matrices, got {}",
                spec.num_layers(),
                self.layers.len()
            )));
        }
        for (l, w) in self.layers.iter().enumerate() {
            let expected = spec.layer_shape(l);
            if w.shape() != expected {
                return Err(Error::ShapeMismatch {
                    expected,
                    got: w.shape(),
                });
            }
        }
        Ok(())
    }
}

/// Inputs `x` (`B × input_dim`) and targets `y` (`B × output_dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Matrix,
    pub y: Matrix,
    /// Training step this batch feeds.
    pub step: u64,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Layer inputs retained for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    /// `inputs[l]` is the input of layer `l`; `inputs[0]` is the batch.
    pub inputs: Vec<Matrix>,
    pub output: Matrix,
}

impl Activations {
    /// Post-activation hidden states, one per hidden layer.
    pub fn hidden(&self) -> &[Matrix] {
        &self.inputs[1..]
    }
}

pub(crate) fn apply_layers(
    layers: &[&Matrix],
    multipliers: &[f64],
    x: &Matrix,
) -> (Vec<Matrix>, Matrix) {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut h = x.clone();
    let last = layers.len() - 1;
    for (l, (w, &a)) in layers.iter().zip(multipliers).enumerate() {
        let mut z = h.matmul_nt(w);
        if a != 1.0 {
            z = z.scale(a);
        }
        inputs.push(h);
        h = if l == last { z } else { z.map(f64::tanh) };
    }
    (inputs, h)
}

fn multipliers(spec: &MlpSpec) -> Vec<f64> {
    (0..spec.num_layers()).map(|l| spec.scaling(l).multiplier).collect()
}

/// Mean squared error over all `B · output_dim` entries.
pub fn mse(pred: &Matrix, target: &Matrix) -> f64 {
    let n = pred.data().len() as f64;
    pred.data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n
}

pub fn forward(spec: &MlpSpec, params: &MlpParams, batch: &Batch) -> Result<(Activations, f64)> {
    params.check_against(spec)?;
    if batch.x.cols() != spec.input_dim || batch.y.cols() != spec.output_dim || batch.x.rows() != batch.y.rows() {
        return Err(Error::ShapeMismatch {
            expected: (batch.x.rows(), spec.output_dim),
            got: batch.y.shape(),
        });
    }
    let layers: Vec<&Matrix> = params.layers.iter().collect();
    let (inputs, output) = apply_layers(&layers, &multipliers(spec), &batch.x);
    let loss = mse(&output, &batch.y);
    if !loss.is_finite() || !output.is_finite() {
        return Err(Error::Divergence { step: batch.step });
    }
    Ok((Activations { inputs, output }, loss))
}

/// Exact gradients of the MSE with respect to the trainable weights `w`.
pub fn backward(
    spec: &MlpSpec,
    params: &MlpParams,
    acts: &Activations,
    batch: &Batch,
) -> Result<Vec<Matrix>> {
    params.check_against(spec)?;
    if acts.inputs.len() != spec.num_layers() {
        return Err(Error::InvalidInput(format!(
            "activations hold {} layers, spec has {}",
            acts.inputs.len(),
            spec.num_layers()
        )));
    }
    acts.output.check_same_shape(&batch.y)?;
    let n = acts.output.data().len() as f64;
    let mut delta = acts.output.zip_map(&batch.y, |p, t| 2.0 * (p - t) / n);
    let mut grads = vec![Matrix::zeros(1, 1); spec.num_layers()];
    for l in (0..spec.num_layers()).rev() {
        let a = spec.scaling(l).multiplier;
        let h_in = &acts.inputs[l];
        let mut g = delta.matmul_tn(h_in);
        if a != 1.0 {
            g = g.scale(a);
        }
        if l > 0 {
            let mut back = delta.matmul(&params.layers[l]);
            if a != 1.0 {
                back = back.scale(a);
            }
            delta = back.zip_map(h_in, |d, h| d * (1.0 - h * h));
        }
        grads[l] = g;
    }
    Ok(grads)
}
