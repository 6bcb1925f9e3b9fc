//! `sweep-batch`: train every (optimizer, batch size) cell, then emit the
//! batch-size analyses per loss threshold.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use muonbench_core::batchlab::{
    build_sweep_curve, fit_piecewise, pareto_frontier, slope_minus_one_check, token_advantage, token_optimal_batch,
    token_ratio, tradeoff_points, PiecewiseFit, SlopeReport, SweepCurve, TradeoffPoint,
};
use muonbench_core::model::LossTrace;
use muonbench_core::Error as CoreError;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{load_json, SweepConfig};
use crate::emit::{opt, write_json, Csv, Plot, Series};
use crate::error::{CliError, CliResult};
use crate::store::{content_hash, RunStore, Workspace};

#[derive(Debug, Clone, Serialize)]
pub struct CellStatus {
    pub optimizer: String,
    pub batch_size: usize,
    pub batch_tokens: u64,
    pub run_id: Option<String>,
    pub cached: bool,
    pub diverged: bool,
    pub min_smoothed: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Consistency {
    /// `max |T − B·S|` over reached points (exact integers, so 0 when sound).
    pub tokens_identity_max_abs: f64,
    /// `max |(R − 1) − ΔT/T_M|` over shared points.
    pub ratio_identity_max_abs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSummary {
    pub threshold: f64,
    pub dir: String,
    pub reached: BTreeMap<String, usize>,
    pub token_optimal_batch: BTreeMap<String, Option<u64>>,
    pub piecewise: BTreeMap<String, Result<PiecewiseFit, String>>,
    pub slope_check: BTreeMap<String, Option<SlopeReport>>,
    pub mean_token_ratio: Option<f64>,
    pub consistency: Consistency,
    /// Descriptive only: which optimizer needed fewer tokens at each shared batch.
    pub fewer_tokens: Vec<(u64, String)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub sweep_id: String,
    pub baseline: String,
    pub candidate: String,
    pub cells: Vec<CellStatus>,
    pub thresholds: Vec<ThresholdSummary>,
}

pub struct SweepOutput {
    pub dir: PathBuf,
    pub summary: SweepSummary,
}

fn curve_csv(curve: &SweepCurve, path: &Path) -> CliResult<()> {
    let mut c = Csv::new(&["batch_tokens", "steps", "tokens", "reached"]);
    for p in &curve.points {
        c.row(vec![
            p.batch.to_string(),
            opt(p.steps),
            opt(p.tokens),
            p.reached().to_string(),
        ]);
    }
    c.write(path)
}

fn tradeoff_csv(points: &[TradeoffPoint], path: &Path) -> CliResult<()> {
    let mut c = Csv::new(&["batch_tokens", "devices", "compute", "time", "reached"]);
    for p in points {
        c.row(vec![
            p.batch.to_string(),
            p.devices.to_string(),
            p.compute.to_string(),
            p.time.to_string(),
            p.reached.to_string(),
        ]);
    }
    c.write(path)
}

fn series_from_curve(name: &str, curve: &SweepCurve, tokens: bool) -> Series {
    Series {
        name: name.to_string(),
        points: curve
            .reached()
            .map(|(b, s, t)| (b as f64, if tokens { t as f64 } else { s as f64 }))
            .collect(),
    }
}

pub fn cmd_sweep_batch(ws: &Workspace, store: &RunStore, config_path: &Path, seed: Option<u64>) -> CliResult<SweepOutput> {
    let mut cfg: SweepConfig = load_json(config_path)?;
    if let Some(s) = seed {
        cfg.base.run_seed = s;
    }
    cfg.validate()?;
    run_sweep(ws, store, &cfg)
}

pub fn run_sweep(ws: &Workspace, store: &RunStore, cfg: &SweepConfig) -> CliResult<SweepOutput> {
    let sweep_id = content_hash(cfg);
    let dir = ws.analysis_subdir(&format!("sweep-{sweep_id}"))?;
    write_json(&dir.join("config.json"), cfg)?;
    let names: Vec<String> = cfg.optimizers.iter().map(|o| o.name.clone()).collect();

    let cells = cfg.cells();
    let results: Vec<(CellStatus, Option<LossTrace>)> = cells
        .par_iter()
        .map(|cell| {
            let name = names[cell.optimizer].clone();
            let batch_tokens = cell.config.batch_tokens();
            match store.get_or_train(&cell.config) {
                Ok(rec) => (
                    CellStatus {
                        optimizer: name,
                        batch_size: cell.batch_size,
                        batch_tokens,
                        run_id: Some(rec.manifest.run_id.clone()),
                        cached: rec.cached,
                        diverged: rec.trace.diverged,
                        min_smoothed: rec.trace.min_smoothed(),
                        error: None,
                    },
                    Some(rec.trace),
                ),
                Err(e) => (
                    CellStatus {
                        optimizer: name,
                        batch_size: cell.batch_size,
                        batch_tokens,
                        run_id: None,
                        cached: false,
                        diverged: false,
                        min_smoothed: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();

    let mut traces: Vec<BTreeMap<u64, LossTrace>> = vec![BTreeMap::new(); names.len()];
    for (cell, (status, trace)) in cells.iter().zip(&results) {
        if let Some(t) = trace {
            traces[cell.optimizer].insert(status.batch_tokens, t.clone());
        }
    }
    let statuses: Vec<CellStatus> = results.into_iter().map(|(s, _)| s).collect();
    let mut runs = Csv::new(&["optimizer", "batch_size", "batch_tokens", "run_id", "cached", "diverged", "min_smoothed", "error"]);
    for s in &statuses {
        runs.row(vec![
            s.optimizer.clone(),
            s.batch_size.to_string(),
            s.batch_tokens.to_string(),
            opt(s.run_id.clone()),
            s.cached.to_string(),
            s.diverged.to_string(),
            opt(s.min_smoothed),
            opt(s.error.as_ref().map(|e| format!("\"{}\"", e.replace('"', "'")))),
        ]);
    }
    runs.write(&dir.join("runs.csv"))?;

    let cost = cfg.cost_model();
    let mut summaries = Vec::new();
    let mut unreachable = Vec::new();
    for (ti, &threshold) in cfg.thresholds.iter().enumerate() {
        let tdir = dir.join(format!("threshold-{ti}"));
        std::fs::create_dir_all(&tdir).map_err(|e| CliError::io(format!("creating {}", tdir.display()), e))?;
        let summary = analyse_threshold(&tdir, threshold, &names, &traces, cfg, &cost)?;
        if summary.reached.values().all(|&n| n == 0) {
            unreachable.push(threshold);
        }
        summaries.push(summary);
    }

    let summary = SweepSummary {
        sweep_id,
        baseline: names[0].clone(),
        candidate: names[1].clone(),
        cells: statuses,
        thresholds: summaries,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    if !unreachable.is_empty() {
        let lo = summary
            .cells
            .iter()
            .filter_map(|c| c.min_smoothed)
            .fold(f64::INFINITY, f64::min);
        return Err(CliError::Unreachable(format!(
            "thresholds {unreachable:?} were reached by no run; the lowest smoothed loss achieved is {lo}, so thresholds must be >= {lo} (artifacts written to {})",
            dir.display()
        )));
    }
    Ok(SweepOutput { dir, summary })
}

fn analyse_threshold(
    tdir: &Path,
    threshold: f64,
    names: &[String],
    traces: &[BTreeMap<u64, LossTrace>],
    cfg: &SweepConfig,
    cost: &muonbench_core::batchlab::CostModel,
) -> CliResult<ThresholdSummary> {
    let mut curves: Vec<Option<SweepCurve>> = Vec::new();
    let mut summary = ThresholdSummary {
        threshold,
        dir: tdir.file_name().unwrap().to_string_lossy().into_owned(),
        reached: BTreeMap::new(),
        token_optimal_batch: BTreeMap::new(),
        piecewise: BTreeMap::new(),
        slope_check: BTreeMap::new(),
        mean_token_ratio: None,
        consistency: Consistency {
            tokens_identity_max_abs: 0.0,
            ratio_identity_max_abs: 0.0,
        },
        fewer_tokens: Vec::new(),
        error: None,
    };
    let mut errors = Vec::new();
    let mut frontier_series = Vec::new();
    let mut tradeoff_series = Vec::new();
    for (name, tr) in names.iter().zip(traces) {
        let curve = match build_sweep_curve(tr, threshold) {
            Ok(c) => c,
            Err(e @ CoreError::Unreachable { .. }) | Err(e @ CoreError::InvalidInput(_)) => {
                errors.push(format!("{name}: {e}"));
                summary.reached.insert(name.clone(), 0);
                summary.token_optimal_batch.insert(name.clone(), None);
                curves.push(None);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        curve_csv(&curve, &tdir.join(format!("curve_{name}.csv")))?;
        let at_start: Vec<u64> = curve.reached().filter(|&(_, s, _)| s == 0).map(|(b, _, _)| b).collect();
        if !at_start.is_empty() {
            errors.push(format!(
                "{name}: threshold already met at step 0 for batches {at_start:?}; it is at or above the initial loss"
            ));
        }
        let reached: Vec<_> = curve.reached().collect();
        summary.reached.insert(name.clone(), reached.len());
        let tok_err = reached
            .iter()
            .map(|&(b, s, t)| (t as f64 - b as f64 * s as f64).abs())
            .fold(0.0, f64::max);
        summary.consistency.tokens_identity_max_abs = summary.consistency.tokens_identity_max_abs.max(tok_err);
        summary
            .token_optimal_batch
            .insert(name.clone(), token_optimal_batch(&curve, cfg.token_opt_rel_tol).ok());
        let fit = fit_piecewise(&curve);
        summary
            .slope_check
            .insert(name.clone(), fit.as_ref().ok().map(|f| slope_minus_one_check(f, &curve)));
        summary.piecewise.insert(name.clone(), fit.map_err(|e| e.to_string()));

        let points = tradeoff_points(&curve, cost)?;
        tradeoff_csv(&points, &tdir.join(format!("tradeoff_{name}.csv")))?;
        let frontier = pareto_frontier(&points);
        tradeoff_csv(&frontier, &tdir.join(format!("frontier_{name}.csv")))?;
        tradeoff_series.push(Series {
            name: name.clone(),
            points: points.iter().filter(|p| p.reached).map(|p| (p.time, p.compute)).collect(),
        });
        frontier_series.push(Series {
            name: format!("{name} frontier"),
            points: frontier.iter().map(|p| (p.time, p.compute)).collect(),
        });
        curves.push(Some(curve));
    }

    if let (Some(Some(a)), Some(Some(m))) = (curves.first(), curves.get(1)) {
        match (token_ratio(a, m), token_advantage(a, m)) {
            (Ok(ratio), Ok(adv)) => {
                let mut c = Csv::new(&["batch_tokens", "tokens_a", "tokens_m", "ratio", "excess", "advantage"]);
                for (r, (_, d)) in ratio.iter().zip(&adv) {
                    let ta = a.tokens_at(r.batch).unwrap();
                    let tm = m.tokens_at(r.batch).unwrap();
                    c.row(vec![
                        r.batch.to_string(),
                        ta.to_string(),
                        tm.to_string(),
                        r.ratio.to_string(),
                        r.excess.to_string(),
                        d.to_string(),
                    ]);
                    let err = ((r.ratio - 1.0) - *d as f64 / tm as f64).abs();
                    summary.consistency.ratio_identity_max_abs = summary.consistency.ratio_identity_max_abs.max(err);
                    let winner = match ta.cmp(&tm) {
                        std::cmp::Ordering::Greater => names[1].clone(),
                        std::cmp::Ordering::Less => names[0].clone(),
                        std::cmp::Ordering::Equal => "tie".to_string(),
                    };
                    summary.fewer_tokens.push((r.batch, winner));
                }
                c.write(&tdir.join("token_ratio.csv"))?;
                summary.mean_token_ratio = Some(ratio.iter().map(|r| r.ratio).sum::<f64>() / ratio.len() as f64);
                Plot {
                    title: format!("token ratio {}/{} at L = {threshold}", names[0], names[1]),
                    x_label: "batch size (tokens)".into(),
                    y_label: "ratio".into(),
                    log_x: true,
                    log_y: false,
                    series: vec![Series {
                        name: "R".into(),
                        points: ratio.iter().map(|r| (r.batch as f64, r.ratio)).collect(),
                    }],
                }
                .write(&tdir.join("token_ratio.svg"))?;
            }
            (Err(e), _) | (_, Err(e)) => errors.push(format!("ratio: {e}")),
        }
    }

    let mut opt_csv = Csv::new(&["optimizer", "token_optimal_batch"]);
    for (name, b) in &summary.token_optimal_batch {
        opt_csv.row(vec![name.clone(), opt(*b)]);
    }
    opt_csv.write(&tdir.join("token_optimal.csv"))?;
    write_json(&tdir.join("piecewise.json"), &summary.piecewise)?;

    for (tokens, file, y) in [(false, "steps.svg", "steps to loss"), (true, "tokens.svg", "tokens to loss")] {
        Plot {
            title: format!("{y} at L = {threshold}"),
            x_label: "batch size (tokens)".into(),
            y_label: y.into(),
            log_x: true,
            log_y: true,
            series: names
                .iter()
                .zip(&curves)
                .filter_map(|(n, c)| c.as_ref().map(|c| series_from_curve(n, c, tokens)))
                .collect(),
        }
        .write(&tdir.join(file))?;
    }
    tradeoff_series.extend(frontier_series);
    Plot {
        title: format!("compute vs time at L = {threshold}"),
        x_label: "time".into(),
        y_label: "device-hours".into(),
        log_x: true,
        log_y: true,
        series: tradeoff_series,
    }
    .write(&tdir.join("frontier.svg"))?;

    if !errors.is_empty() {
        summary.error = Some(errors.join("; "));
    }
    write_json(&tdir.join("summary.json"), &summary)?;
    Ok(summary)
}
