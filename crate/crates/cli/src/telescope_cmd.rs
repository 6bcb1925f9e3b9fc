//! `telescope`: the hierarchical sweep over training runs, plus its ledger and
//! the loss-vs-size power law.

use std::path::{Path, PathBuf};

use muonbench_core::telescope::{powerlaw_fit, run_telescope_with, PowerLawFit, TelescopeOutcome};
use serde::Serialize;

use crate::config::{load_json, TelescopeJob};
use crate::emit::{opt, write_json, Csv};
use crate::error::CliResult;
use crate::store::{content_hash, RunStore, Workspace};

#[derive(Debug, Clone, Serialize)]
pub struct PowerLawRecord {
    pub sizes: Vec<f64>,
    pub losses: Vec<f64>,
    pub fit: Option<PowerLawFit>,
    pub note: Option<String>,
}

pub struct TelescopeReport {
    pub dir: PathBuf,
    pub outcome: TelescopeOutcome,
    pub powerlaw: PowerLawRecord,
}

pub fn cmd_telescope(ws: &Workspace, store: &RunStore, config_path: &Path, seed: Option<u64>) -> CliResult<TelescopeReport> {
    let mut job: TelescopeJob = load_json(config_path)?;
    if let Some(s) = seed {
        job.base.run_seed = s;
    }
    job.validate()?;
    run_job(ws, store, &job)
}

/// Final smoothed loss, or +∞ for diverged or failed runs.
fn final_loss(store: &RunStore, job: &TelescopeJob, width: usize, point: &[f64], steps: u64) -> f64 {
    match store.get_or_train(&job.run_config(width, point, steps)) {
        Ok(rec) if !rec.trace.diverged => rec.trace.final_smoothed().unwrap_or(f64::INFINITY),
        _ => f64::INFINITY,
    }
}

pub fn run_job(ws: &Workspace, store: &RunStore, job: &TelescopeJob) -> CliResult<TelescopeReport> {
    let dir = ws.analysis_subdir(&format!("telescope-{}", content_hash(job)))?;
    write_json(&dir.join("config.json"), job)?;
    let cfg = &job.telescope;
    let sweep = |w: usize, p: &[f64]| final_loss(store, job, w, p, cfg.steps);
    let last = |w: usize, p: &[f64]| final_loss(store, job, w, p, cfg.final_steps());
    let outcome = run_telescope_with(cfg, &sweep, &last)?;

    let mut header: Vec<String> = vec!["level".into(), "width".into()];
    header.extend(job.params.iter().map(|p| serde_json::to_value(p).unwrap().as_str().unwrap().to_string()));
    header.push("loss".into());
    let mut dist = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (i, level) in outcome.levels.iter().enumerate() {
        write_json(&dir.join(format!("level-{i}.json")), level)?;
        for r in &level.results {
            let mut row = vec![i.to_string(), level.width.to_string()];
            row.extend(r.point.iter().map(|x| x.to_string()));
            row.push(opt(r.loss));
            dist.row(row);
        }
    }
    dist.write(&dir.join("loss_distribution.csv"))?;
    write_json(&dir.join("ledger.json"), &outcome.ledger)?;
    write_json(
        &dir.join("outcome.json"),
        &serde_json::json!({
            "selected": outcome.selected,
            "final_width": cfg.final_width,
            "final_loss": outcome.final_loss,
            "boundary_levels": outcome.boundary_warnings().collect::<Vec<_>>(),
        }),
    )?;

    // Best loss per swept width plus the final run, against parameter count.
    let mut sizes = Vec::new();
    let mut losses = Vec::new();
    let points = outcome
        .levels
        .iter()
        .map(|l| (l.width, l.best_loss))
        .chain(std::iter::once((cfg.final_width, outcome.final_loss)));
    for (w, loss) in points {
        if let Some(l) = loss.filter(|l| *l > 0.0) {
            let mut spec = job.base.model;
            spec.hidden_width = w;
            sizes.push(spec.num_params() as f64);
            losses.push(l);
        }
    }
    let powerlaw = match powerlaw_fit(&sizes, &losses) {
        Ok(fit) => PowerLawRecord {
            sizes,
            losses,
            fit: Some(fit),
            note: None,
        },
        Err(e) => PowerLawRecord {
            sizes,
            losses,
            fit: None,
            note: Some(format!("fit skipped: {e}")),
        },
    };
    write_json(&dir.join("powerlaw.json"), &powerlaw)?;
    Ok(TelescopeReport { dir, outcome, powerlaw })
}
