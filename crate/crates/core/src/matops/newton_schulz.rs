use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Quintic Newton-Schulz iteration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSchulzConfig {
    pub steps: usize,
    pub eps: f64,
    pub coefficients: (f64, f64, f64),
}

impl Default for NewtonSchulzConfig {
    fn default() -> Self {
        Self {
            steps: 5,
            eps: 1e-7,
            coefficients: (3.4445, -4.7750, 2.0315),
        }
    }
}

impl NewtonSchulzConfig {
    /// Classical cubic iteration `X ← 1.5X − 0.5XXᵀX`, which converges to the
    /// polar factor instead of oscillating inside a band around it.
    pub fn cubic(steps: usize) -> Self {
        Self {
            steps,
            eps: 1e-7,
            coefficients: (1.5, -0.5, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidInput("newton-schulz steps must be >= 1".into()));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidInput("newton-schulz eps must be > 0".into()));
        }
        let (a, b, c) = self.coefficients;
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::InvalidInput("newton-schulz coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Approximately orthogonalizes `g`, pushing every singular value towards 1.
///
/// Tall inputs are transposed first so the Gram matrix `XXᵀ` is the smaller
/// one; square inputs are left as is. A zero input maps to zero.
pub fn newton_schulz(g: &Matrix, cfg: &NewtonSchulzConfig) -> Matrix {
    let transposed = g.rows() > g.cols();
    let mut x = if transposed { g.transpose() } else { g.clone() };
    let (a, b, c) = cfg.coefficients;

    let inv = 1.0 / (x.frobenius_norm() + cfg.eps);
    x = x.scale(inv);
    for _ in 0..cfg.steps {
        let gram = x.matmul_nt(&x);
        let poly = gram.scale(b).add_scaled(&gram.matmul(&gram), c);
        x = x.scale(a).add(&poly.matmul(&x));
    }

    if transposed {
        x.transpose()
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_zero() {
        let out = newton_schulz(&Matrix::zeros(3, 4), &NewtonSchulzConfig::default());
        assert_eq!(out, Matrix::zeros(3, 4));
    }

    #[test]
    fn keeps_shape() {
        let g = Matrix::from_fn(7, 3, |r, c| (r * 3 + c) as f64 - 4.0);
        let out = newton_schulz(&g, &NewtonSchulzConfig::default());
        assert_eq!(out.shape(), (7, 3));
    }

    #[test]
    fn config_validation() {
        assert!(NewtonSchulzConfig::default().validate().is_ok());
        let bad = NewtonSchulzConfig {
            steps: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = NewtonSchulzConfig {
            eps: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
