use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mup::golden_section_min;

/// `L(d) = a / d^alpha + e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub alpha: f64,
    pub e: f64,
    pub r_squared: f64,
    /// The exponent is not identified by the data (flat losses, or the best
    /// exponent sits on the search bound).
    pub degenerate: bool,
}

impl PowerLawFit {
    pub fn predict(&self, d: f64) -> f64 {
        self.a * d.powf(-self.alpha) + self.e
    }
}

/// Exponent search interval.
pub const ALPHA_RANGE: (f64, f64) = (1e-3, 3.0);
const ALPHA_GRID: usize = 600;

/// Closed-form `(a, e, sse)` for fixed `alpha`.
fn linear_solve(sizes: &[f64], losses: &[f64], alpha: f64) -> (f64, f64, f64) {
    let xs: Vec<f64> = sizes.iter().map(|d| d.powf(-alpha)).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = losses.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(losses).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let e = my - a * mx;
    let sse = xs.iter().zip(losses).map(|(x, y)| (y - a * x - e).powi(2)).sum();
    (a, e, sse)
}

/// Least-squares fit of `a/d^alpha + e`: log-spaced grid over the exponent,
/// golden-section refinement around the best cell, and a linear solve for
/// `(a, e)` at each exponent.
pub fn powerlaw_fit(sizes: &[f64], losses: &[f64]) -> Result<PowerLawFit> {
    if sizes.len() != losses.len() {
        return Err(Error::InvalidInput(format!("{} sizes but {} losses", sizes.len(), losses.len())));
    }
    if sizes.len() < 3 {
        return Err(Error::InvalidInput("power-law fit needs at least 3 points".into()));
    }
    if sizes.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidInput("sizes must be positive and finite".into()));
    }
    if losses.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput("losses must be positive and finite".into()));
    }
    let n = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let ss_tot: f64 = losses.iter().map(|l| (l - mean).powi(2)).sum();
    if ss_tot <= 1e-24 * mean * mean * n {
        return Ok(PowerLawFit {
            a: 0.0,
            alpha: ALPHA_RANGE.0,
            e: mean,
            r_squared: 0.0,
            degenerate: true,
        });
    }

    let (lo, hi) = (ALPHA_RANGE.0.ln(), ALPHA_RANGE.1.ln());
    let grid: Vec<f64> = (0..ALPHA_GRID)
        .map(|i| (lo + (hi - lo) * i as f64 / (ALPHA_GRID - 1) as f64).exp())
        .collect();
    let sse = |alpha: f64| linear_solve(sizes, losses, alpha).2;
    let best = (0..grid.len())
        .min_by(|&i, &j| sse(grid[i]).total_cmp(&sse(grid[j])))
        .unwrap();
    let left = grid[best.saturating_sub(1)];
    let right = grid[(best + 1).min(grid.len() - 1)];
    let refined = golden_section_min(sse, left, right, 1e-13 * right);
    let alpha = if sse(refined) <= sse(grid[best]) { refined } else { grid[best] };
    let (a, e, err) = linear_solve(sizes, losses, alpha);
    let at_bound = best == 0 || best == grid.len() - 1;
    Ok(PowerLawFit {
        a,
        alpha,
        e,
        r_squared: (1.0 - err / ss_tot).clamp(0.0, 1.0),
        degenerate: at_bound || !(a > 0.0),
    })
}
