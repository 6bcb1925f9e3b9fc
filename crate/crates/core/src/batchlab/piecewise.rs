use serde::{Deserialize, Serialize};

use super::curve::SweepCurve;
use crate::error::{Error, Result};
use crate::mup::golden_section_min;

/// Why a piecewise fit should be read with care.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWarning {
    /// No points right of the breakpoint: the data show no post-critical regime.
    NoRightSegment,
    /// Right slope hit the `−1` clamp.
    SlopeAtLowerBound,
    /// Right slope hit the `0` clamp.
    SlopeAtUpperBound,
}

/// `ln S = −ln B + b1` for `B ≤ b_star`, `ln S = m·ln B + b2` above,
/// continuous at `b_star`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFit {
    pub b_star: f64,
    pub b1: f64,
    pub m: f64,
    pub b2: f64,
    pub sse: f64,
    #[serde(default)]
    pub warning: Option<FitWarning>,
}

impl PiecewiseFit {
    /// Model with minimal tokens `t_star`, breakpoint `b_star` and right slope `m`.
    pub fn from_params(b_star: f64, m: f64, t_star: f64) -> Self {
        let b1 = t_star.ln();
        Self {
            b_star,
            b1,
            m,
            b2: b1 - (1.0 + m) * b_star.ln(),
            sse: 0.0,
            warning: None,
        }
    }

    pub fn log_steps(&self, batch: f64) -> f64 {
        let x = batch.ln();
        if batch <= self.b_star {
            -x + self.b1
        } else {
            self.m * x + self.b2
        }
    }

    pub fn steps(&self, batch: f64) -> f64 {
        self.log_steps(batch).exp()
    }

    pub fn tokens(&self, batch: f64) -> f64 {
        if batch <= self.b_star {
            self.b1.exp()
        } else {
            self.b2.exp() * batch.powf(self.m + 1.0)
        }
    }

    /// `|(−ln B* + b1) − (m·ln B* + b2)|`.
    pub fn continuity_residual(&self) -> f64 {
        let x = self.b_star.ln();
        ((-x + self.b1) - (self.m * x + self.b2)).abs()
    }
}

/// Slope clamp for the right segment.
const M_MIN: f64 = -1.0;
const M_MAX: f64 = 0.0;

struct Candidate {
    xc: f64,
    b1: f64,
    m: f64,
    sse: f64,
    warning: Option<FitWarning>,
}

fn fit_at(xs: &[f64], ys: &[f64], xc: f64) -> Option<Candidate> {
    let left: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] <= xc).collect();
    if left.is_empty() {
        return None;
    }
    let b1 = left.iter().map(|&i| ys[i] + xs[i]).sum::<f64>() / left.len() as f64;
    let yc = -xc + b1;
    let right: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] > xc).collect();
    let (m, warning) = if right.is_empty() {
        (M_MIN, Some(FitWarning::NoRightSegment))
    } else {
        let sxx: f64 = right.iter().map(|&i| (xs[i] - xc).powi(2)).sum();
        let sxy: f64 = right.iter().map(|&i| (xs[i] - xc) * (ys[i] - yc)).sum();
        let m = sxy / sxx;
        if m <= M_MIN {
            (M_MIN, Some(FitWarning::SlopeAtLowerBound))
        } else if m >= M_MAX {
            (M_MAX, Some(FitWarning::SlopeAtUpperBound))
        } else {
            (m, None)
        }
    };
    let sse = (0..xs.len())
        .map(|i| {
            let pred = if xs[i] <= xc { -xs[i] + b1 } else { yc + m * (xs[i] - xc) };
            (ys[i] - pred).powi(2)
        })
        .sum();
    Some(Candidate { xc, b1, m, sse, warning })
}

/// Two-segment fit in `(ln B, ln S)` space with the left slope fixed at −1.
///
/// Candidate breakpoints are every observed batch and the geometric midpoints
/// between neighbours; the best candidate is then refined by golden-section
/// search over the two adjacent cells. Ties prefer the larger breakpoint, so
/// pure perfect-scaling data put it at the largest batch.
pub fn fit_piecewise(curve: &SweepCurve) -> Result<PiecewiseFit> {
    let batches: Vec<f64> = curve.reached().map(|(b, _, _)| b as f64).collect();
    let xs: Vec<f64> = batches.iter().map(|b| b.ln()).collect();
    let ys: Vec<f64> = curve.reached().map(|(_, s, _)| (s.max(1) as f64).ln()).collect();
    if xs.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "piecewise fit needs at least 4 reached points, got {}",
            xs.len()
        )));
    }
    let mut candidates: Vec<f64> = Vec::with_capacity(2 * xs.len());
    for (i, &x) in xs.iter().enumerate() {
        candidates.push(x);
        if let Some(&next) = xs.get(i + 1) {
            candidates.push(0.5 * (x + next));
        }
    }
    let scale = ys.iter().map(|y| y * y).sum::<f64>().max(1.0);
    let tie = 1e-12 * scale;
    let better = |c: &Candidate, best: &Candidate| c.sse < best.sse - tie || (c.sse <= best.sse + tie && c.xc > best.xc);

    let mut best: Option<Candidate> = None;
    for &xc in &candidates {
        if let Some(c) = fit_at(&xs, &ys, xc) {
            if best.as_ref().map_or(true, |b| better(&c, b)) {
                best = Some(c);
            }
        }
    }
    let mut best = best.expect("the largest batch is always a valid candidate");

    // The left set is constant inside each cell between observed batches,
    // where the SSE is smooth in the breakpoint; refine in both neighbours.
    let k = xs.partition_point(|&x| x <= best.xc);
    let cells = [
        (k >= 2).then(|| (xs[k - 2], xs[k - 1])),
        (k >= 1 && k < xs.len()).then(|| (xs[k - 1], xs[k])),
    ];
    for (lo, hi) in cells.into_iter().flatten() {
        let inner = |xc: f64| fit_at(&xs, &ys, xc).map_or(f64::INFINITY, |c| c.sse);
        let span = hi - lo;
        let xc = golden_section_min(inner, lo, hi - 1e-12 * span.max(1.0), 1e-10 * span.max(1e-300));
        if let Some(c) = fit_at(&xs, &ys, xc) {
            if c.sse < best.sse - tie {
                best = c;
            }
        }
    }

    let b2 = best.b1 - (1.0 + best.m) * best.xc;
    // Report an observed batch exactly rather than through exp(ln B).
    let b_star = match xs.iter().position(|&x| x == best.xc) {
        Some(i) => batches[i],
        None => best.xc.exp(),
    };
    Ok(PiecewiseFit {
        b_star,
        b1: best.b1,
        m: best.m,
        b2,
        sse: best.sse,
        warning: best.warning,
    })
}

/// Closed-form token ratio `T_A(B)/T_M(B)` of two fitted models.
///
/// The three-branch form assumes `fit_a.b_star ≤ fit_m.b_star`; otherwise the
/// roles are swapped and the result inverted.
pub fn ratio_model(fit_a: &PiecewiseFit, fit_m: &PiecewiseFit, batch: f64) -> Result<f64> {
    Ok(ratio_branch(fit_a, fit_m, batch)?.0)
}

/// Log-log slope of the token ratio at `batch`, one of
/// `{0, m_A + 1, m_A − m_M}` (negated branch values when roles are swapped).
pub fn ratio_log_slope(fit_a: &PiecewiseFit, fit_m: &PiecewiseFit, batch: f64) -> Result<f64> {
    Ok(ratio_branch(fit_a, fit_m, batch)?.1)
}

fn ratio_branch(a: &PiecewiseFit, m: &PiecewiseFit, batch: f64) -> Result<(f64, f64)> {
    if !(batch > 0.0) || !batch.is_finite() {
        return Err(Error::InvalidInput(format!("batch size must be > 0, got {batch}")));
    }
    if a.b_star > m.b_star {
        let (r, s) = ratio_branch(m, a, batch)?;
        return Ok((1.0 / r, if s == 0.0 { 0.0 } else { -s }));
    }
    Ok(if batch <= a.b_star {
        ((a.b1 - m.b1).exp(), 0.0)
    } else if batch <= m.b_star {
        ((a.b2 - m.b1).exp() * batch.powf(a.m + 1.0), a.m + 1.0)
    } else {
        ((a.b2 - m.b2).exp() * batch.powf(a.m - m.m), a.m - m.m)
    })
}

/// Token exponents `m + 1` of the two segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    /// Free least-squares slope of `ln S` over the left points, or the
    /// model's fixed `−1` when fewer than two points lie left of `b_star`.
    pub left_slope: f64,
    pub left_points: usize,
    pub left_exponent: f64,
    pub right_exponent: f64,
    /// Tokens are flat on the left segment: `|left_slope + 1| ≤ 0.02`.
    pub left_constant: bool,
}

pub const SLOPE_TOL: f64 = 0.02;

pub fn slope_minus_one_check(fit: &PiecewiseFit, curve: &SweepCurve) -> SlopeReport {
    let left: Vec<(f64, f64)> = curve
        .reached()
        .filter(|&(b, _, _)| (b as f64) <= fit.b_star * (1.0 + 1e-12))
        .map(|(b, s, _)| ((b as f64).ln(), (s.max(1) as f64).ln()))
        .collect();
    let left_slope = if left.len() >= 2 {
        let n = left.len() as f64;
        let mx = left.iter().map(|p| p.0).sum::<f64>() / n;
        let my = left.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = left.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = left.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        sxy / sxx
    } else {
        -1.0
    };
    SlopeReport {
        left_slope,
        left_points: left.len(),
        left_exponent: left_slope + 1.0,
        right_exponent: fit.m + 1.0,
        left_constant: (left_slope + 1.0).abs() <= SLOPE_TOL,
    }
}
