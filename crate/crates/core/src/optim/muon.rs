use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::{newton_schulz, Matrix, NewtonSchulzConfig};

/// Muon hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuonHyper {
    pub momentum: f64,
    pub weight_decay: f64,
    /// RMS-matching constant; the update is scaled by `base_scale·√max(m, n)`.
    /// Zero disables rescaling.
    pub base_scale: f64,
    pub nesterov: bool,
    pub ns: NewtonSchulzConfig,
}

impl Default for MuonHyper {
    fn default() -> Self {
        Self {
            momentum: 0.95,
            weight_decay: 0.0,
            base_scale: 0.2,
            nesterov: true,
            ns: NewtonSchulzConfig::default(),
        }
    }
}

impl MuonHyper {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidInput(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if !(self.base_scale >= 0.0 && self.base_scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "base_scale must be >= 0, got {}",
                self.base_scale
            )));
        }
        self.ns.validate()
    }

    /// Multiplier applied to the orthogonalized update of an `rows × cols` matrix.
    pub fn update_scale(&self, rows: usize, cols: usize) -> f64 {
        if self.base_scale > 0.0 {
            self.base_scale * (rows.max(cols) as f64).sqrt()
        } else {
            1.0
        }
    }
}

/// First-moment buffer, the only state Muon keeps.
#[derive(Debug, Clone, PartialEq)]
pub struct MuonState {
    pub first_moment: Matrix,
}

impl MuonState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            first_moment: Matrix::zeros(rows, cols),
        }
    }
}

/// Advances the momentum and returns the matrix handed to the orthogonalizer.
pub(crate) fn muon_direction(g: &Matrix, state: &MuonState, hyper: &MuonHyper) -> (Matrix, Matrix) {
    let m = g.add_scaled(&state.first_moment, hyper.momentum);
    let dir = if hyper.nesterov {
        g.add_scaled(&m, hyper.momentum)
    } else {
        m.clone()
    };
    (m, dir)
}

/// One Muon step with coupled weight decay:
///
/// ```text
/// M  = G + β·M_prev
/// O  = NS(G + β·M)            (nesterov)   or NS(M)
/// W' = W − lr·(scale·O + λ·W)
/// ```
pub fn muon_update(
    w: &Matrix,
    g: &Matrix,
    state: &MuonState,
    hyper: &MuonHyper,
    lr: f64,
) -> Result<(Matrix, MuonState)> {
    muon_update_with(w, g, state, hyper, lr, |x| newton_schulz(x, &hyper.ns))
}

/// [`muon_update`] with a caller-supplied orthogonalizer.
pub fn muon_update_with(
    w: &Matrix,
    g: &Matrix,
    state: &MuonState,
    hyper: &MuonHyper,
    lr: f64,
    orthogonalize: impl Fn(&Matrix) -> Matrix,
) -> Result<(Matrix, MuonState)> {
    w.check_same_shape(g)?;
    w.check_same_shape(&state.first_moment)?;
    g.check_finite("muon gradient")?;
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::InvalidInput(format!("learning rate must be >= 0, got {lr}")));
    }
    let (m, dir) = muon_direction(g, state, hyper);
    let o = orthogonalize(&dir);
    let scale = hyper.update_scale(w.rows(), w.cols());
    let step = o.scale(scale).add_scaled(w, hyper.weight_decay);
    let new_w = if lr == 0.0 { w.clone() } else { w.add_scaled(&step, -lr) };
    Ok((new_w, MuonState { first_moment: m }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lr_keeps_weights_but_advances_state() {
        let w = Matrix::from_fn(3, 4, |r, c| (r + c) as f64 * 0.1);
        let g = Matrix::from_fn(3, 4, |r, c| (r as f64) - (c as f64));
        let state = MuonState {
            first_moment: Matrix::from_fn(3, 4, |r, _| r as f64),
        };
        let hyper = MuonHyper {
            weight_decay: 0.3,
            ..Default::default()
        };
        let (w2, s2) = muon_update(&w, &g, &state, &hyper, 0.0).unwrap();
        assert_eq!(w2, w);
        assert_eq!(s2.first_moment, g.add_scaled(&state.first_moment, 0.95));
    }

    #[test]
    fn rejects_shape_mismatch_and_nan() {
        let hyper = MuonHyper::default();
        let w = Matrix::zeros(2, 2);
        let state = MuonState::new(2, 2);
        assert!(matches!(
            muon_update(&w, &Matrix::zeros(2, 3), &state, &hyper, 0.1),
            Err(Error::ShapeMismatch { .. })
        ));
        let mut g = Matrix::zeros(2, 2);
        g[(0, 0)] = f64::NAN;
        assert!(matches!(
            muon_update(&w, &g, &state, &hyper, 0.1),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn scale_rule() {
        let h = MuonHyper::default();
        assert!((h.update_scale(16, 64) - 0.2 * 8.0).abs() < 1e-15);
        let off = MuonHyper {
            base_scale: 0.0,
            ..Default::default()
        };
        assert_eq!(off.update_scale(16, 64), 1.0);
    }

    #[test]
    fn hyper_validation() {
        assert!(MuonHyper::default().validate().is_ok());
        for bad in [
            MuonHyper { momentum: 1.0, ..Default::default() },
            MuonHyper { weight_decay: -0.1, ..Default::default() },
            MuonHyper { base_scale: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
