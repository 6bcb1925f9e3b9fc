//! Telescoping hyperparameter sweep across width doublings: each doubling
//! shrinks the grid by `4^{-1/k}` per hyperparameter and halves its spacing
//! around the previous optimum, keeping per-level cost roughly constant.

mod powerlaw;

pub use powerlaw::{powerlaw_fit, PowerLawFit, ALPHA_RANGE};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sweep plan. Coordinates are whatever the objective expects, typically
/// log-space hyperparameters such as `log2(lr)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelescopeConfig {
    pub base_width: usize,
    pub calibration_width: usize,
    pub final_width: usize,
    /// Points per hyperparameter at the base width.
    pub initial_points: usize,
    /// Inclusive `(lower, upper)` coordinate range per hyperparameter.
    pub ranges: Vec<(f64, f64)>,
    /// Training steps per sweep run; one cost unit is `width² · steps`.
    pub steps: u64,
    /// Training steps of the final run; defaults to `steps`.
    #[serde(default)]
    pub final_steps: Option<u64>,
}

fn pow2_multiple(n: usize, base: usize) -> bool {
    base > 0 && n >= base && n % base == 0 && (n / base).is_power_of_two()
}

impl TelescopeConfig {
    pub fn k(&self) -> usize {
        self.ranges.len()
    }

    pub fn final_steps(&self) -> u64 {
        self.final_steps.unwrap_or(self.steps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(pow2_multiple(self.calibration_width, self.base_width)
            && pow2_multiple(self.final_width, self.base_width)
            && self.calibration_width <= self.final_width)
        {
            return Err(Error::InvalidInput(
                "widths must satisfy N0 <= Nc <= N, each a power-of-two multiple of N0".into(),
            ));
        }
        if self.initial_points < 2 {
            return Err(Error::InvalidInput("initial_points must be >= 2".into()));
        }
        if self.ranges.is_empty() {
            return Err(Error::InvalidInput("at least one hyperparameter range is required".into()));
        }
        for (i, &(lo, hi)) in self.ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidInput(format!("range {i} must be finite with lower < upper")));
            }
        }
        if self.steps == 0 {
            return Err(Error::InvalidInput("steps must be >= 1".into()));
        }
        Ok(())
    }

    /// Full-grid size `G = m^k`.
    pub fn full_grid_size(&self) -> u128 {
        (self.initial_points as u128).pow(self.k() as u32)
    }

    /// Widths swept: `N0, 2·N0, …, Nc`.
    pub fn level_widths(&self) -> Vec<usize> {
        let mut out = vec![self.base_width];
        while *out.last().unwrap() < self.calibration_width {
            out.push(out.last().unwrap() * 2);
        }
        out
    }

    /// Points per hyperparameter at each level, rounded half-up with a floor
    /// of one.
    pub fn points_per_level(&self) -> Vec<usize> {
        let shrink = 4f64.powf(-1.0 / self.k() as f64);
        let mut p = self.initial_points;
        self.level_widths()
            .iter()
            .enumerate()
            .map(|(l, _)| {
                if l > 0 {
                    p = ((p as f64 * shrink + 0.5).floor() as usize).max(1);
                }
                p
            })
            .collect()
    }

    /// Unrounded points per hyperparameter, `m·4^{-ℓ/k}`.
    pub fn exact_points_per_level(&self) -> Vec<f64> {
        let k = self.k() as f64;
        (0..self.level_widths().len())
            .map(|l| self.initial_points as f64 * 4f64.powf(-(l as f64) / k))
            .collect()
    }
}

pub fn run_cost(width: usize, steps: u64) -> u128 {
    (width as u128) * (width as u128) * steps as u128
}

/// Grid along one hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub points: Vec<f64>,
    pub spacing: f64,
}

impl Axis {
    fn lo(&self) -> f64 {
        self.points[0]
    }

    fn hi(&self) -> f64 {
        *self.points.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub point: Vec<f64>,
    /// Final loss; `None` when the run diverged (scored as +∞).
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopeLevel {
    pub width: usize,
    pub axes: Vec<Axis>,
    /// Row-major over the axes (last axis fastest).
    pub results: Vec<GridResult>,
    pub argmin: Vec<f64>,
    pub best_loss: Option<f64>,
    /// The argmin sits on an outer face of a multi-point axis.
    pub on_boundary: bool,
    pub cost: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeLedger {
    pub level_costs: Vec<u128>,
    pub final_cost: u128,
    /// `G` runs at the final width plus the final run.
    pub full_grid_cost: u128,
    pub percent_saved: f64,
    pub percent_on_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopeOutcome {
    pub levels: Vec<TelescopeLevel>,
    pub selected: Vec<f64>,
    /// Loss of the final-width run at the selected point.
    pub final_loss: Option<f64>,
    pub ledger: ComputeLedger,
}

impl TelescopeOutcome {
    pub fn boundary_warnings(&self) -> impl Iterator<Item = usize> + '_ {
        self.levels.iter().enumerate().filter(|(_, l)| l.on_boundary).map(|(i, _)| i)
    }
}

fn cartesian(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.points.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    out
}

/// `count` points with `spacing` centered on `center`, shifted to lie within
/// `[lo, hi]`.
fn submesh(center: f64, spacing: f64, count: usize, lo: f64, hi: f64) -> Axis {
    let half = (count as f64 - 1.0) / 2.0;
    let mut start = center - half * spacing;
    let end = start + (count as f64 - 1.0) * spacing;
    if end > hi {
        start -= end - hi;
    }
    if start < lo {
        start = lo;
    }
    Axis {
        points: (0..count).map(|i| start + i as f64 * spacing).collect(),
        spacing,
    }
}

fn score(loss: f64) -> Option<f64> {
    loss.is_finite().then_some(loss)
}

fn evaluate_level(
    width: usize,
    axes: Vec<Axis>,
    steps: u64,
    objective: &(dyn Fn(usize, &[f64]) -> f64 + Sync),
) -> TelescopeLevel {
    let points = cartesian(&axes);
    let results: Vec<GridResult> = points
        .into_par_iter()
        .map(|point| {
            let loss = score(objective(width, &point));
            GridResult { point, loss }
        })
        .collect();
    let best = results
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (i, r)| match (acc, r.loss) {
            (Some((_, b)), Some(l)) if l < b => Some((i, l)),
            (None, Some(l)) => Some((i, l)),
            _ => acc,
        });
    let (argmin, best_loss) = match best {
        Some((i, l)) => (results[i].point.clone(), Some(l)),
        // Everything diverged: keep the grid center so later levels stay put.
        None => (axes.iter().map(|a| 0.5 * (a.lo() + a.hi())).collect(), None),
    };
    let on_boundary = best_loss.is_some()
        && axes
            .iter()
            .zip(&argmin)
            .any(|(a, &x)| a.points.len() > 1 && (x == a.lo() || x == a.hi()));
    let cost = results.len() as u128 * run_cost(width, steps);
    TelescopeLevel {
        width,
        axes,
        results,
        argmin,
        best_loss,
        on_boundary,
        cost,
    }
}

/// Runs the telescoping sweep, then the final-width run at the selected point.
///
/// `objective(width, point)` returns the final loss of one training run; a
/// non-finite value marks a diverged run.
pub fn run_telescope(
    cfg: &TelescopeConfig,
    objective: &(dyn Fn(usize, &[f64]) -> f64 + Sync),
) -> Result<TelescopeOutcome> {
    run_telescope_with(cfg, objective, objective)
}

/// As [`run_telescope`], with a separate objective for the final run (which
/// may train for a different number of steps).
pub fn run_telescope_with(
    cfg: &TelescopeConfig,
    objective: &(dyn Fn(usize, &[f64]) -> f64 + Sync),
    final_objective: &(dyn Fn(usize, &[f64]) -> f64 + Sync),
) -> Result<TelescopeOutcome> {
    cfg.validate()?;
    let widths = cfg.level_widths();
    let counts = cfg.points_per_level();
    let mut levels: Vec<TelescopeLevel> = Vec::with_capacity(widths.len());
    for (l, (&width, &count)) in widths.iter().zip(&counts).enumerate() {
        let axes: Vec<Axis> = match levels.last() {
            None => cfg
                .ranges
                .iter()
                .map(|&(lo, hi)| {
                    let spacing = (hi - lo) / (count as f64 - 1.0);
                    Axis {
                        points: (0..count).map(|i| lo + i as f64 * spacing).collect(),
                        spacing,
                    }
                })
                .collect(),
            Some(prev) => prev
                .axes
                .iter()
                .zip(&prev.argmin)
                .map(|(a, &c)| submesh(c, a.spacing / 2.0, count, a.lo(), a.hi()))
                .collect(),
        };
        debug_assert!(l == 0 || axes.iter().all(|a| a.points.len() == count));
        levels.push(evaluate_level(width, axes, cfg.steps, objective));
    }
    let selected = levels.last().unwrap().argmin.clone();
    let final_loss = score(final_objective(cfg.final_width, &selected));
    let ledger = compute_ledger(cfg, &levels, run_cost(cfg.final_width, cfg.final_steps()))?;
    Ok(TelescopeOutcome {
        levels,
        selected,
        final_loss,
        ledger,
    })
}

/// Percent of compute saved against sweeping the full `m^k` grid at the
/// final width; both plans pay for the final run.
pub fn compute_ledger(cfg: &TelescopeConfig, levels: &[TelescopeLevel], final_cost: u128) -> Result<ComputeLedger> {
    if levels.is_empty() {
        return Err(Error::InvalidInput("no completed levels".into()));
    }
    if cfg.initial_points == 0 || cfg.ranges.is_empty() {
        return Err(Error::InvalidInput("the full grid must have at least one point".into()));
    }
    let level_costs: Vec<u128> = levels.iter().map(|l| l.cost).collect();
    let spent = level_costs.iter().sum::<u128>() + final_cost;
    let full_grid_cost = cfg.full_grid_size() * run_cost(cfg.final_width, cfg.steps) + final_cost;
    let percent_saved = if full_grid_cost == 0 {
        0.0
    } else {
        (100.0 * (1.0 - spent as f64 / full_grid_cost as f64)).clamp(0.0, 100.0)
    };
    let percent_on_final = if spent == 0 {
        0.0
    } else {
        100.0 * final_cost as f64 / spent as f64
    };
    Ok(ComputeLedger {
        level_costs,
        final_cost,
        full_grid_cost,
        percent_saved,
        percent_on_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n0: usize, nc: usize, n: usize, m: usize, k: usize) -> TelescopeConfig {
        TelescopeConfig {
            base_width: n0,
            calibration_width: nc,
            final_width: n,
            initial_points: m,
            ranges: vec![(-2.0, 4.0); k],
            steps: 10,
            final_steps: None,
        }
    }

    #[test]
    fn reduction_factor() {
        let c = cfg(16, 32, 32, 8, 2);
        assert_eq!(c.points_per_level(), vec![8, 4]);
        let c = cfg(16, 256, 256, 8, 2);
        assert_eq!(c.points_per_level(), vec![8, 4, 2, 1, 1]);
        assert_eq!(cfg(8, 64, 64, 5, 3).points_per_level(), vec![5, 3, 2, 1]);
    }

    #[test]
    fn validation() {
        assert!(cfg(16, 48, 64, 8, 2).validate().is_err());
        assert!(cfg(16, 64, 32, 8, 2).validate().is_err());
        assert!(cfg(16, 32, 64, 1, 2).validate().is_err());
        assert!(cfg(16, 32, 64, 8, 0).validate().is_err());
        assert!(cfg(16, 16, 16, 2, 1).validate().is_ok());
    }

    #[test]
    fn spacing_halves_and_stays_in_hull() {
        let c = cfg(16, 32, 32, 8, 2);
        let out = run_telescope(&c, &|_, p: &[f64]| (p[0] + 2.0).powi(2) + (p[1] - 4.0).powi(2)).unwrap();
        let (a0, a1) = (&out.levels[0].axes[0], &out.levels[1].axes[0]);
        assert!((a1.spacing - a0.spacing / 2.0).abs() < 1e-15);
        assert!(a1.points[0] >= a0.points[0] && *a1.points.last().unwrap() <= *a0.points.last().unwrap());
        assert!(out.levels[0].on_boundary);
    }

    #[test]
    fn degenerate_single_level() {
        let c = cfg(16, 16, 64, 5, 1);
        let out = run_telescope(&c, &|_, p: &[f64]| (p[0] - 0.9).powi(2)).unwrap();
        assert_eq!(out.levels.len(), 1);
        assert_eq!(out.selected, vec![1.0]);
    }

    #[test]
    fn diverged_points_score_infinite() {
        let c = cfg(16, 16, 16, 4, 1);
        let out = run_telescope(&c, &|_, p: &[f64]| if p[0] > 1.0 { f64::NAN } else { -p[0] }).unwrap();
        assert_eq!(out.selected, vec![0.0]);
        assert!(out.levels[0].results.iter().filter(|r| r.loss.is_none()).count() == 2);
    }

    #[test]
    fn ledger_unit_grid_saves_nothing() {
        let mut c = cfg(16, 16, 16, 1, 1);
        c.initial_points = 1;
        let level = TelescopeLevel {
            width: 16,
            axes: vec![],
            results: vec![],
            argmin: vec![],
            best_loss: None,
            on_boundary: false,
            cost: run_cost(16, 10),
        };
        let l = compute_ledger(&c, &[level], run_cost(16, 10)).unwrap();
        assert_eq!(l.percent_saved, 0.0);
        assert_eq!(l.percent_on_final, 50.0);
        assert!(compute_ledger(&c, &[], 0).is_err());
    }
}
