use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.95,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidInput(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Matrix,
    pub v: Matrix,
    pub step: u64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            step: 0,
        }
    }
}

/// Bias-corrected Adam step with coupled weight decay:
/// `W' = W − lr·(m̂ / (√v̂ + eps) + λ·W)`.
pub fn adamw_update(
    w: &Matrix,
    g: &Matrix,
    state: &AdamState,
    hyper: &AdamHyper,
    lr: f64,
) -> Result<(Matrix, AdamState)> {
    w.check_same_shape(g)?;
    w.check_same_shape(&state.m)?;
    w.check_same_shape(&state.v)?;
    g.check_finite("adamw gradient")?;
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::InvalidInput(format!("learning rate must be >= 0, got {lr}")));
    }
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let m = state.m.zip_map(g, |m, g| b1 * m + (1.0 - b1) * g);
    let v = state.v.zip_map(g, |v, g| b2 * v + (1.0 - b2) * g * g);
    let step = state.step + 1;
    let c1 = 1.0 - b1.powi(step as i32);
    let c2 = 1.0 - b2.powi(step as i32);

    let new_w = if lr == 0.0 {
        w.clone()
    } else {
        let data = w
            .data()
            .iter()
            .zip(m.data())
            .zip(v.data())
            .map(|((&w, &m), &v)| {
                let mhat = m / c1;
                let vhat = v / c2;
                w - lr * (mhat / (vhat.sqrt() + hyper.eps) + hyper.weight_decay * w)
            })
            .collect();
        Matrix::from_raw(w.rows(), w.cols(), data)
    };
    Ok((new_w, AdamState { m, v, step }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_sign() {
        let hyper = AdamHyper::default();
        for c in [-3.0, 1e-3, 250.0] {
            let w = Matrix::zeros(2, 3);
            let g = Matrix::from_fn(2, 3, |_, _| c);
            let (w2, s) = adamw_update(&w, &g, &AdamState::new(2, 3), &hyper, 0.01).unwrap();
            assert_eq!(s.step, 1);
            let expected = -(c.signum()) * 0.01 / (1.0 + hyper.eps / c.abs());
            for &x in w2.data() {
                assert!((x - expected).abs() < 1e-15, "{x} vs {expected}");
            }
        }
    }

    #[test]
    fn zero_gradient_with_zero_moment_keeps_weights() {
        let hyper = AdamHyper::default();
        let w = Matrix::from_fn(2, 2, |r, c| (r + 2 * c) as f64);
        let g = Matrix::zeros(2, 2);
        let (w2, _) = adamw_update(&w, &g, &AdamState::new(2, 2), &hyper, 0.1).unwrap();
        assert_eq!(w2, w);

        // A nonzero first moment keeps pushing the weights.
        let state = AdamState {
            m: Matrix::from_fn(2, 2, |_, _| 0.5),
            v: Matrix::from_fn(2, 2, |_, _| 0.25),
            step: 3,
        };
        let (w3, _) = adamw_update(&w, &g, &state, &hyper, 0.1).unwrap();
        assert!(w3.data().iter().zip(w.data()).all(|(a, b)| a < b));
    }

    #[test]
    fn validation() {
        assert!(AdamHyper::default().validate().is_ok());
        assert!(AdamHyper { beta2: 1.0, ..Default::default() }.validate().is_err());
        assert!(AdamHyper { eps: 0.0, ..Default::default() }.validate().is_err());
        let w = Matrix::zeros(2, 2);
        assert!(adamw_update(&w, &w, &AdamState::new(2, 2), &AdamHyper::default(), -1.0).is_err());
        assert!(adamw_update(&w, &Matrix::zeros(1, 2), &AdamState::new(2, 2), &AdamHyper::default(), 1.0).is_err());
    }
}
