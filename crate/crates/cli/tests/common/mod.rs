#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_muonbench"))
}

pub fn muonbench(ws: &Path, args: &[&str]) -> Output {
    bin().arg("--workspace").arg(ws).args(args).output().expect("spawn muonbench")
}

pub fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn run_config() -> Value {
    json!({
        "model": {"input_dim": 16, "output_dim": 4, "hidden_width": 32, "depth": 2, "mup": true},
        "task": {"teacher_seed": 11, "data_seed": 12, "teacher_width": 256},
        "optimizer": {"kind": "muon"},
        "schedule": {"max_lr": 0.02, "warmup_steps": 5},
        "batch_size": 16,
        "total_steps": 40,
        "run_seed": 13
    })
}

/// Two optimizers × six batch sizes × three thresholds; every threshold
/// sits below the initial loss and is reached by most cells.
pub fn sweep_config() -> Value {
    json!({
        "base": run_config(),
        "optimizers": [
            {"name": "adamw", "optimizer": {"kind": "adamw"}, "max_lr": 0.01},
            {"name": "muon", "optimizer": {"kind": "muon"}, "max_lr": 0.02}
        ],
        "batch_sizes": [4, 8, 16, 32, 64, 128],
        "thresholds": [0.35, 0.25, 0.15],
        "sample_budget": 8192,
        "trace_points": 100
    })
}

pub fn telescope_config() -> Value {
    json!({
        "base": run_config(),
        "telescope": {
            "base_width": 8,
            "calibration_width": 16,
            "final_width": 32,
            "initial_points": 3,
            "ranges": [[-2.5, -1.0], [-4.0, -2.0]],
            "steps": 30
        }
    })
}
