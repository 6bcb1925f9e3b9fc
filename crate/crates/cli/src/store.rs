//! Workspace layout and the content-addressed run store.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use muonbench_core::model::{train, LossTrace, RunConfig, TraceSample};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const WORKSPACE_ENV: &str = "MUONBENCH_WORKSPACE";

/// `root/{runs,analysis,configs}`.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>) -> CliResult<Self> {
        let ws = Self { root: root.into() };
        for dir in [ws.runs_dir(), ws.analysis_dir(), ws.configs_dir()] {
            fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        }
        Ok(ws)
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }

    pub fn analysis_dir(&self) -> PathBuf {
        self.root.join("analysis")
    }

    pub fn configs_dir(&self) -> PathBuf {
        self.root.join("configs")
    }

    pub fn analysis_subdir(&self, name: &str) -> CliResult<PathBuf> {
        let dir = self.analysis_dir().join(name);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        Ok(dir)
    }
}

/// Hex SHA-256 of a value's canonical JSON, truncated to 16 characters.
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configs always serialize");
    let digest = Sha256::digest(&json);
    hex::encode(digest)[..16].to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config: RunConfig,
    pub run_seed: u64,
    pub teacher_seed: u64,
    pub data_seed: u64,
    pub batch_tokens: u64,
    pub diverged: bool,
    pub samples: usize,
    /// Desk wall time; metadata only, never used in analysis.
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub manifest: RunManifest,
    pub trace: LossTrace,
    pub cached: bool,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| CliError::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(format!("renaming to {}", path.display()), e))
}

pub fn write_trace_jsonl(path: &Path, trace: &LossTrace) -> CliResult<()> {
    let mut buf = BufWriter::new(Vec::new());
    for s in &trace.samples {
        serde_json::to_writer(&mut buf, s).map_err(|e| CliError::Other(e.to_string()))?;
        buf.write_all(b"\n").expect("writing to memory");
    }
    write_atomic(path, &buf.into_inner().expect("flushing to memory"))
}

pub fn read_trace_jsonl(path: &Path, batch_tokens: u64, diverged: bool) -> CliResult<LossTrace> {
    let file = fs::File::open(path).map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: TraceSample = serde_json::from_str(&line)
            .map_err(|e| CliError::Other(format!("{}:{}: {e}", path.display(), i + 1)))?;
        samples.push(s);
    }
    Ok(LossTrace {
        batch_tokens,
        samples,
        diverged,
    })
}

/// Trains configs on demand, caching traces under `runs/<config hash>/`.
#[derive(Debug, Clone)]
pub struct RunStore {
    dir: PathBuf,
    force: bool,
}

impl RunStore {
    pub fn new(ws: &Workspace, force: bool) -> Self {
        Self {
            dir: ws.runs_dir(),
            force,
        }
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.dir.join(run_id)
    }

    pub fn load(&self, run_id: &str) -> CliResult<Option<RunRecord>> {
        let dir = self.run_dir(run_id);
        let manifest_path = dir.join("manifest.json");
        if !manifest_path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&manifest_path)
            .map_err(|e| CliError::io(format!("reading {}", manifest_path.display()), e))?;
        let manifest: RunManifest =
            serde_json::from_str(&text).map_err(|e| CliError::Other(format!("{}: {e}", manifest_path.display())))?;
        let trace = read_trace_jsonl(&dir.join("trace.jsonl"), manifest.batch_tokens, manifest.diverged)?;
        Ok(Some(RunRecord {
            manifest,
            trace,
            cached: true,
        }))
    }

    /// Returns the cached run for `config`, training it first if absent (or
    /// always, under `force`).
    pub fn get_or_train(&self, config: &RunConfig) -> CliResult<RunRecord> {
        let run_id = content_hash(config);
        if !self.force {
            if let Some(rec) = self.load(&run_id)? {
                return Ok(rec);
            }
        }
        let start = Instant::now();
        let trace = train(config)?;
        let manifest = RunManifest {
            run_id: run_id.clone(),
            config: *config,
            run_seed: config.run_seed,
            teacher_seed: config.task.teacher_seed,
            data_seed: config.task.data_seed,
            batch_tokens: trace.batch_tokens,
            diverged: trace.diverged,
            samples: trace.samples.len(),
            wall_time_secs: start.elapsed().as_secs_f64(),
        };
        let dir = self.run_dir(&run_id);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        write_trace_jsonl(&dir.join("trace.jsonl"), &trace)?;
        let json = serde_json::to_vec_pretty(&manifest).expect("manifests serialize");
        write_atomic(&dir.join("manifest.json"), &json)?;
        Ok(RunRecord {
            manifest,
            trace,
            cached: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let trace = LossTrace::from_raw(4, [(0, 1.0), (5, 0.5), (10, 0.1 + 0.2)]);
        let path = dir.path().join("t.jsonl");
        write_trace_jsonl(&path, &trace).unwrap();
        let back = read_trace_jsonl(&path, 4, false).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn hash_is_stable_and_discriminating() {
        let a = serde_json::json!({"x": 1});
        let b = serde_json::json!({"x": 2});
        assert_eq!(content_hash(&a), content_hash(&a));
        assert_ne!(content_hash(&a), content_hash(&b));
        assert_eq!(content_hash(&a).len(), 16);
    }
}
