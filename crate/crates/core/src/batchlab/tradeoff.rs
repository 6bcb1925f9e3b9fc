use serde::{Deserialize, Serialize};

use super::curve::SweepCurve;
use crate::error::{Error, Result};

/// Batches below `below` tokens run on `devices` devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceTier {
    pub below: u64,
    pub devices: u64,
}

/// Simulated data-parallel step cost:
/// `step_time(B, d) = fixed_overhead + kappa·B/d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    /// Tiers in increasing `below` order.
    pub device_rule: Vec<DeviceTier>,
    /// Device count at or above the last tier.
    pub max_devices: u64,
    pub kappa: f64,
    pub fixed_overhead: f64,
}

impl Default for CostModel {
    /// 8 devices under 1M tokens, doubling at 2M, 4M, 8M, 128 beyond.
    fn default() -> Self {
        Self::scaled(1 << 20)
    }
}

impl CostModel {
    /// The default tier shape with the first boundary at `unit` tokens.
    pub fn scaled(unit: u64) -> Self {
        Self {
            device_rule: (0..4)
                .map(|i| DeviceTier {
                    below: unit << i,
                    devices: 8 << i,
                })
                .collect(),
            max_devices: 128,
            kappa: 1e-6,
            fixed_overhead: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.fixed_overhead >= 0.0 && self.kappa + self.fixed_overhead > 0.0)
            || !self.kappa.is_finite()
            || !self.fixed_overhead.is_finite()
        {
            return Err(Error::InvalidInput(
                "kappa and fixed_overhead must be finite, >= 0 and not both zero".into(),
            ));
        }
        let mut prev = (0u64, 0u64);
        for t in &self.device_rule {
            if t.devices == 0 || t.below <= prev.0 || t.devices < prev.1 {
                return Err(Error::InvalidInput(
                    "device tiers must have increasing bounds and non-decreasing device counts".into(),
                ));
            }
            prev = (t.below, t.devices);
        }
        if self.max_devices < prev.1.max(1) {
            return Err(Error::InvalidInput("max_devices must be >= every tier's devices".into()));
        }
        Ok(())
    }

    pub fn devices(&self, batch: u64) -> u64 {
        self.device_rule
            .iter()
            .find(|t| batch < t.below)
            .map_or(self.max_devices, |t| t.devices)
    }

    pub fn step_time(&self, batch: u64, devices: u64) -> f64 {
        self.fixed_overhead + self.kappa * batch as f64 / devices as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub batch: u64,
    pub devices: u64,
    /// Device-time to reach the threshold.
    pub compute: f64,
    /// Wall time to reach the threshold.
    pub time: f64,
    pub reached: bool,
}

/// Compute and time to reach the curve's threshold at each batch size.
/// Unreached batches get infinite cost.
pub fn tradeoff_points(curve: &SweepCurve, cost: &CostModel) -> Result<Vec<TradeoffPoint>> {
    cost.validate()?;
    Ok(curve
        .points
        .iter()
        .map(|p| {
            let devices = cost.devices(p.batch);
            match p.steps {
                Some(s) => {
                    let time = s as f64 * cost.step_time(p.batch, devices);
                    TradeoffPoint {
                        batch: p.batch,
                        devices,
                        compute: devices as f64 * time,
                        time,
                        reached: true,
                    }
                }
                None => TradeoffPoint {
                    batch: p.batch,
                    devices,
                    compute: f64::INFINITY,
                    time: f64::INFINITY,
                    reached: false,
                },
            }
        })
        .collect())
}

/// Indices of the non-dominated `(compute, time)` pairs, both minimized,
/// ordered by compute. Exact duplicates keep the earliest.
pub fn pareto_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len())
        .filter(|&i| points[i].0.is_finite() && points[i].1.is_finite())
        .collect();
    order.sort_by(|&i, &j| {
        points[i]
            .0
            .total_cmp(&points[j].0)
            .then(points[i].1.total_cmp(&points[j].1))
            .then(i.cmp(&j))
    });
    let mut best_time = f64::INFINITY;
    let mut out = Vec::new();
    for i in order {
        if points[i].1 < best_time {
            best_time = points[i].1;
            out.push(i);
        }
    }
    out
}

pub fn pareto_frontier(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
    let pairs: Vec<(f64, f64)> = points
        .iter()
        .map(|p| if p.reached { (p.compute, p.time) } else { (f64::INFINITY, f64::INFINITY) })
        .collect();
    pareto_indices(&pairs).into_iter().map(|i| points[i]).collect()
}

/// Whether every point of `other` is weakly dominated by some point of
/// `frontier`, i.e. `frontier` is at least as cheap at every time budget.
pub fn frontier_dominates(frontier: &[TradeoffPoint], other: &[TradeoffPoint]) -> bool {
    other.iter().filter(|p| p.reached).all(|p| {
        frontier
            .iter()
            .any(|q| q.reached && q.compute <= p.compute && q.time <= p.time)
    })
}
