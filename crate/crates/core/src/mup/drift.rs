use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares fit of `x*(n) = x_star_inf + alpha / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftFit {
    pub x_star_inf: f64,
    pub alpha: f64,
    /// RMS of the fit residuals.
    pub residual: f64,
}

impl DriftFit {
    pub fn predict(&self, width: f64) -> f64 {
        self.x_star_inf + self.alpha / width
    }
}

pub fn fit_drift(widths: &[f64], argmins: &[f64]) -> Result<DriftFit> {
    if widths.len() != argmins.len() {
        return Err(Error::InvalidInput(format!(
            "{} widths but {} argmins",
            widths.len(),
            argmins.len()
        )));
    }
    if widths.len() < 2 {
        return Err(Error::InvalidInput("fit_drift needs at least 2 widths".into()));
    }
    if widths.iter().chain(argmins).any(|v| !v.is_finite()) || widths.iter().any(|&w| w <= 0.0) {
        return Err(Error::InvalidInput("widths must be positive and argmins finite".into()));
    }
    let u: Vec<f64> = widths.iter().map(|w| 1.0 / w).collect();
    let k = u.len() as f64;
    let mu = u.iter().sum::<f64>() / k;
    let my = argmins.iter().sum::<f64>() / k;
    let suu: f64 = u.iter().map(|x| (x - mu) * (x - mu)).sum();
    if suu <= f64::EPSILON * mu * mu * k {
        return Err(Error::Degenerate("all widths are equal; drift is unidentifiable".into()));
    }
    let suy: f64 = u.iter().zip(argmins).map(|(x, y)| (x - mu) * (y - my)).sum();
    let alpha = suy / suu;
    let x_star_inf = my - alpha * mu;
    let ss: f64 = u
        .iter()
        .zip(argmins)
        .map(|(x, y)| {
            let r = y - (x_star_inf + alpha * x);
            r * r
        })
        .sum();
    Ok(DriftFit {
        x_star_inf,
        alpha,
        residual: (ss / k).sqrt(),
    })
}

fn step_at(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

fn d1(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn d2(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Stationarity tolerance on `ℓ₀′(x*)`.
pub const STATIONARY_TOL: f64 = 1e-6;
/// Magnitude below which a branch factor counts as zero.
pub const BRANCH_TOL: f64 = 1e-8;

/// Leading-order drift `α = −ℓ₁′(x*)/ℓ₀″(x*)` of the optimum of
/// `loss(f0(x) + f1(x)/n)`, with `ℓ₀ = loss∘f0` and `ℓ₁ = loss′(f0)·f1`.
pub fn drift_coefficient(
    f0: impl Fn(f64) -> f64,
    f1: impl Fn(f64) -> f64,
    loss: impl Fn(f64) -> f64,
    x_star: f64,
) -> Result<f64> {
    if !x_star.is_finite() {
        return Err(Error::NonFinite("x_star".into()));
    }
    let h = step_at(x_star);
    let l0 = |x: f64| loss(f0(x));
    let l0p = d1(&l0, x_star, h);
    if !(l0p.abs() <= STATIONARY_TOL) {
        return Err(Error::InvalidInput(format!(
            "x_star = {x_star} is not stationary for loss∘f0 (derivative {l0p:e})"
        )));
    }
    let l0pp = d2(&l0, x_star, h);
    let y0 = f0(x_star);
    let loss_p = d1(&loss, y0, step_at(y0));
    let f0p = d1(&f0, x_star, h);
    let loss_flat = loss_p.abs() <= BRANCH_TOL;
    let f0_flat = f0p.abs() <= BRANCH_TOL;

    let alpha = match (loss_flat, f0_flat) {
        (true, true) => {
            return Err(Error::Degenerate(format!(
                "both branch factors vanish: |loss'(f0(x*))| = {:e}, |f0'(x*)| = {:e}",
                loss_p.abs(),
                f0p.abs()
            )))
        }
        // ℓ₁′ = loss″·f0′·f1 and ℓ₀″ = loss″·f0′², so α = −f1/f0′.
        (true, false) => -f1(x_star) / f0p,
        // ℓ₁′ = loss′·f1′ and ℓ₀″ = loss′·f0″, so α = −f1′/f0″.
        (false, true) => {
            let f0pp = d2(&f0, x_star, h);
            if !(f0pp * loss_p > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "x_star is not a local minimum (second derivative {l0pp:e})"
                )));
            }
            -d1(&f1, x_star, h) / f0pp
        }
        (false, false) => {
            if !(l0pp > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "x_star is not a local minimum (second derivative {l0pp:e})"
                )));
            }
            let l1 = |x: f64| {
                let y = f0(x);
                d1(&loss, y, step_at(y)) * f1(x)
            };
            -d1(&l1, x_star, h) / l0pp
        }
    };
    if loss_flat && !(l0pp > 0.0) {
        return Err(Error::InvalidInput(format!(
            "x_star is not a local minimum (second derivative {l0pp:e})"
        )));
    }
    if !alpha.is_finite() {
        return Err(Error::NonFinite("drift coefficient".into()));
    }
    Ok(alpha)
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while (hi - lo).abs() > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Discretization error of a grid search: half the cell size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshError {
    pub epsilon: f64,
}

impl MeshError {
    pub fn from_spacing(spacing: f64) -> Self {
        Self { epsilon: spacing / 2.0 }
    }
}

/// `count` points with the given spacing, centered on `center`.
pub fn grid_points(center: f64, spacing: f64, count: usize) -> Vec<f64> {
    let half = (count as f64 - 1.0) / 2.0;
    (0..count).map(|i| center + (i as f64 - half) * spacing).collect()
}

/// Discrete argmin of `f` over `points`; ties keep the first point.
pub fn grid_argmin(f: impl Fn(f64) -> f64, points: &[f64]) -> Option<(f64, f64)> {
    points
        .iter()
        .map(|&x| (x, f(x)))
        .fold(None, |best: Option<(f64, f64)>, (x, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((x, v)),
        })
}

/// Halves the mesh around the argmin of a coarse grid; returns the coarse
/// and refined argmins with their mesh errors.
pub fn refine_argmin(
    f: impl Fn(f64) -> f64,
    center: f64,
    spacing: f64,
    count: usize,
) -> Option<((f64, MeshError), (f64, MeshError))> {
    let (coarse, _) = grid_argmin(&f, &grid_points(center, spacing, count))?;
    let (fine, _) = grid_argmin(&f, &grid_points(coarse, spacing / 2.0, count))?;
    Some((
        (coarse, MeshError::from_spacing(spacing)),
        (fine, MeshError::from_spacing(spacing / 2.0)),
    ))
}
