use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forward, Batch, DataStream, MlpSpec, RunConfig, Teacher, Trainer};
use std::sync::Arc;

/// Salt separating the probe batch stream from the training stream.
const PROBE_SALT: u64 = 0x5851_f42d_4c95_7f2d;
const PROBE_SIZE: usize = 256;
const SPECTRAL_TOL: f64 = 1e-10;
const SPECTRAL_ITERS: usize = 500;

/// Per-layer output RMS on a fixed probe batch, before and after training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinateRow {
    pub width: usize,
    pub layer: usize,
    pub rms_init: f64,
    /// `None` when the run diverged.
    pub rms_trained: Option<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub width: usize,
    pub layer: usize,
    /// `‖a·w‖₂ / √(fan_out/fan_in)`.
    pub ratio: f64,
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.is_empty() {
        return Err(Error::InvalidInput("at least one width is required".into()));
    }
    if widths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("widths must be strictly ascending".into()));
    }
    let base = widths[0];
    if base == 0 || widths.iter().any(|&w| w % base != 0 || !(w / base).is_power_of_two()) {
        return Err(Error::InvalidInput("widths must be power-of-two multiples of the first".into()));
    }
    Ok(())
}

fn layer_rms(spec: &MlpSpec, trainer: &Trainer, probe: &Batch) -> Result<Vec<f64>> {
    let (acts, _) = forward(spec, trainer.params(), probe)?;
    let mut out: Vec<f64> = acts.inputs[1..].iter().map(|h| h.rms()).collect();
    out.push(acts.output.rms());
    Ok(out)
}

fn probe_batch(base: &RunConfig, seed: u64) -> Batch {
    let teacher = Arc::new(Teacher::new(&base.task, base.model.input_dim, base.model.output_dim));
    DataStream::with_seed(&base.task, teacher, seed ^ PROBE_SALT).next_batch(PROBE_SIZE, 0)
}

/// Trains `base` under muP at every width for `steps` updates and reports
/// the RMS of each layer's output on a shared probe batch.
pub fn coordinate_check(base: &RunConfig, widths: &[usize], steps: u64, seed: u64) -> Result<Vec<CoordinateRow>> {
    check_widths(widths)?;
    let probe = probe_batch(base, seed);
    let per_width: Vec<Result<Vec<CoordinateRow>>> = widths
        .par_iter()
        .map(|&width| {
            let mut cfg = *base;
            cfg.model.hidden_width = width;
            cfg.model.mup = true;
            cfg.total_steps = steps;
            cfg.run_seed = seed;
            cfg.eval_batch = None;
            let mut trainer = Trainer::new(&cfg)?;
            let init = layer_rms(&cfg.model, &trainer, &probe)?;
            let mut trained = Ok(());
            for _ in 0..steps {
                let batch = trainer.next_batch();
                if let Err(e) = trainer.apply(&batch) {
                    trained = Err(e);
                    break;
                }
            }
            let after = match trained {
                Ok(()) => match layer_rms(&cfg.model, &trainer, &probe) {
                    Ok(v) => Some(v),
                    Err(Error::Divergence { .. }) => None,
                    Err(e) => return Err(e),
                },
                Err(Error::Divergence { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(init
                .iter()
                .enumerate()
                .map(|(layer, &rms_init)| CoordinateRow {
                    width,
                    layer,
                    rms_init,
                    rms_trained: after.as_ref().map(|a| a[layer]),
                    diverged: after.is_none(),
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_width {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Spectral-norm ratio of every layer's effective weight at muP init.
pub fn spectral_check(base: &MlpSpec, widths: &[usize], seed: u64) -> Result<Vec<SpectralRow>> {
    check_widths(widths)?;
    base.validate()?;
    let rows: Vec<Vec<SpectralRow>> = widths
        .par_iter()
        .map(|&width| {
            let spec = MlpSpec {
                hidden_width: width,
                mup: true,
                ..*base
            };
            let params = spec.init_params(seed);
            params
                .layers
                .iter()
                .enumerate()
                .map(|(layer, w)| {
                    let s = spec.scaling(layer);
                    let norm = w.spectral_norm(SPECTRAL_TOL, SPECTRAL_ITERS) * s.multiplier;
                    SpectralRow {
                        width,
                        layer,
                        ratio: norm / (s.fan_out as f64 / s.fan_in as f64).sqrt(),
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Per-layer `max/min` of a metric across widths. Non-finite or missing
/// values make the spread infinite.
pub fn spread_by_layer(rows: impl IntoIterator<Item = (usize, Option<f64>)>) -> Vec<(usize, f64)> {
    let mut acc: Vec<(usize, f64, f64, bool)> = Vec::new();
    for (layer, v) in rows {
        let idx = match acc.iter().position(|a| a.0 == layer) {
            Some(i) => i,
            None => {
                acc.push((layer, f64::INFINITY, 0.0, false));
                acc.len() - 1
            }
        };
        match v {
            Some(v) if v.is_finite() && v > 0.0 => {
                acc[idx].1 = acc[idx].1.min(v);
                acc[idx].2 = acc[idx].2.max(v);
            }
            _ => acc[idx].3 = true,
        }
    }
    acc.sort_by_key(|a| a.0);
    acc.into_iter()
        .map(|(layer, lo, hi, bad)| (layer, if bad { f64::INFINITY } else { hi / lo }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::Matrix;

    #[test]
    fn width_validation() {
        assert!(check_widths(&[64, 128, 256]).is_ok());
        assert!(check_widths(&[64]).is_ok());
        assert!(check_widths(&[]).is_err());
        assert!(check_widths(&[64, 96]).is_err());
        assert!(check_widths(&[128, 64]).is_err());
    }

    #[test]
    fn identity_layer_ratio_is_one() {
        let w = Matrix::identity(32);
        let r = w.spectral_norm(SPECTRAL_TOL, SPECTRAL_ITERS) / 1f64.sqrt();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spread_single_width_is_one() {
        let s = spread_by_layer([(0, Some(2.0)), (1, Some(0.5))]);
        assert_eq!(s, vec![(0, 1.0), (1, 1.0)]);
        let s = spread_by_layer([(0, Some(2.0)), (0, Some(0.5)), (0, None)]);
        assert_eq!(s[0].1, f64::INFINITY);
    }
}
