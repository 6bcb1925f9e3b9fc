//! `muonbench` command-line pipelines: training runs, batch-size sweeps,
//! telescoping hyperparameter sweeps and the invariant check suites.

pub mod checks;
pub mod config;
pub mod emit;
pub mod error;
pub mod presets;
pub mod store;
pub mod sweep;
pub mod telescope_cmd;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::checks::{junit_xml, run_suite, Suite};
use crate::config::load_run_config;
use crate::emit::write_text;
use crate::error::{CliError, CliResult};
use crate::store::{RunRecord, RunStore, Workspace, WORKSPACE_ENV};

#[derive(Debug, Parser)]
#[command(name = "muonbench", version, about = "Muon vs AdamW batch-size, muP and telescoping-sweep workbench")]
pub struct Cli {
    /// Worker threads for training runs and grid points [default: logical CPUs].
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Retrain even when a cached run exists.
    #[arg(long, global = true)]
    pub force: bool,
    /// Workspace root [default: $MUONBENCH_WORKSPACE, else ./muonbench-workspace].
    #[arg(long, global = true)]
    pub workspace: Option<PathBuf>,
    /// Replace the run seed of every config.
    #[arg(long, global = true)]
    pub seed_override: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one run config and print its run id.
    Train { config: PathBuf },
    /// Train every (optimizer, batch size) cell and emit the batch-size analyses.
    SweepBatch { config: PathBuf },
    /// Telescoping (learning rate, weight decay) sweep across width doublings.
    Telescope { config: PathBuf },
    /// Run invariant suites and write a JUnit XML report.
    Check {
        #[arg(value_enum)]
        suite: Suite,
        /// Report path [default: <workspace>/analysis/check-<suite>.xml].
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

impl Cli {
    pub fn workspace_root(&self) -> PathBuf {
        self.workspace
            .clone()
            .or_else(|| std::env::var_os(WORKSPACE_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("muonbench-workspace"))
    }
}

pub fn cmd_train(store: &RunStore, config_path: &Path, seed: Option<u64>) -> CliResult<RunRecord> {
    let mut cfg = load_run_config(config_path)?;
    if let Some(s) = seed {
        cfg.run_seed = s;
    }
    let rec = store.get_or_train(&cfg)?;
    if rec.trace.diverged {
        let step = rec.trace.samples.last().map_or(0, |s| s.step);
        return Err(CliError::Divergence {
            run_id: rec.manifest.run_id.clone(),
            step,
        });
    }
    Ok(rec)
}

/// Runs the parsed command inside a worker pool of `--jobs` threads.
pub fn run(cli: Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::config("--jobs", "must be >= 1"));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Other(e.to_string()))?;
    pool.install(|| dispatch(&cli))
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let ws = Workspace::open(cli.workspace_root())?;
    let store = RunStore::new(&ws, cli.force);
    match &cli.command {
        Command::Train { config } => {
            let rec = cmd_train(&store, config, cli.seed_override)?;
            if rec.cached {
                eprintln!("cached: run {} already exists (use --force to retrain)", rec.manifest.run_id);
            }
            println!("{}", rec.manifest.run_id);
        }
        Command::SweepBatch { config } => {
            let out = sweep::cmd_sweep_batch(&ws, &store, config, cli.seed_override)?;
            let cached = out.summary.cells.iter().filter(|c| c.cached).count();
            let failed = out.summary.cells.iter().filter(|c| c.error.is_some()).count();
            println!(
                "{} runs ({cached} cached, {failed} failed), {} thresholds -> {}",
                out.summary.cells.len(),
                out.summary.thresholds.len(),
                out.dir.display()
            );
            for t in &out.summary.thresholds {
                let ratio = t.mean_token_ratio.map_or("n/a".to_string(), |r| format!("{r:.4}"));
                println!(
                    "L={}: reached {:?}, mean token ratio {}/{} = {ratio}",
                    t.threshold, t.reached, out.summary.baseline, out.summary.candidate
                );
            }
        }
        Command::Telescope { config } => {
            let out = telescope_cmd::cmd_telescope(&ws, &store, config, cli.seed_override)?;
            for i in out.outcome.boundary_warnings() {
                let l = &out.outcome.levels[i];
                eprintln!(
                    "warning: level {i} (width {}) argmin {:?} lies on the grid boundary; widen the ranges",
                    l.width, l.argmin
                );
            }
            let ledger = &out.outcome.ledger;
            println!("selected {:?}, final loss {:?}", out.outcome.selected, out.outcome.final_loss);
            println!("compute saved: {:.2}%", ledger.percent_saved);
            println!("compute on final run: {:.2}%", ledger.percent_on_final);
            println!("artifacts: {}", out.dir.display());
        }
        Command::Check { suite, report } => {
            let cases = run_suite(*suite);
            let path = report
                .clone()
                .unwrap_or_else(|| ws.analysis_dir().join(format!("check-{}.xml", suite.name())));
            write_text(&path, &junit_xml(&cases))?;
            for c in &cases {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {}::{} ({:.2}s) {}", c.suite, c.name, c.secs, c.detail);
                if !c.passed && !c.failing_seeds.is_empty() {
                    println!("     reproduce with seeds {:?}", c.failing_seeds);
                }
            }
            let failed = cases.iter().filter(|c| !c.passed).count();
            println!("{} of {} checks passed; report: {}", cases.len() - failed, cases.len(), path.display());
            if failed > 0 {
                return Err(CliError::Other(format!("{failed} check(s) failed")));
            }
        }
    }
    Ok(())
}
