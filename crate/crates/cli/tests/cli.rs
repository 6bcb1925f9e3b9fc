mod common;

use std::fs;

use common::{muonbench, run_config, stderr, stdout, sweep_config, telescope_config, write};
use serde_json::Value;

fn read_json(p: &std::path::Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn train_prints_run_id_and_caches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", &run_config());
    let ws = dir.path().join("ws");
    let first = muonbench(&ws, &["train", cfg.to_str().unwrap()]);
    assert!(first.status.success(), "{}", stderr(&first));
    let id = stdout(&first).trim().to_string();
    assert_eq!(id.len(), 16);
    let run = ws.join("runs").join(&id);
    assert!(run.join("manifest.json").exists() && run.join("trace.jsonl").exists());
    assert_eq!(read_json(&run.join("manifest.json"))["run_id"], id.as_str());

    let second = muonbench(&ws, &["train", cfg.to_str().unwrap()]);
    assert!(second.status.success());
    assert_eq!(stdout(&second).trim(), id);
    assert!(stderr(&second).contains("cached"), "{}", stderr(&second));

    let forced = muonbench(&ws, &["--force", "train", cfg.to_str().unwrap()]);
    assert!(forced.status.success());
    assert!(!stderr(&forced).contains("cached"));
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", &run_config());
    let ws = dir.path().join("ws");
    let a = muonbench(&ws, &["train", cfg.to_str().unwrap()]);
    let b = muonbench(&ws, &["--seed-override", "99", "train", cfg.to_str().unwrap()]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(stdout(&a), stdout(&b));
}

#[test]
fn invalid_config_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let mut v = run_config();
    v["schedule"]["max_lr"] = (-0.1).into();
    let cfg = write(dir.path(), "bad.json", &v);
    let out = muonbench(&ws, &["train", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("schedule.max_lr"), "{}", stderr(&out));

    let mut v = run_config();
    v["batch_size"] = "sixteen".into();
    let cfg = write(dir.path(), "typed.json", &v);
    let out = muonbench(&ws, &["train", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("batch_size"), "{}", stderr(&out));

    let mut v = run_config();
    v["surprise"] = 1.into();
    let cfg = write(dir.path(), "unknown.json", &v);
    assert_eq!(muonbench(&ws, &["train", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn divergent_run_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = run_config();
    v["optimizer"] = serde_json::json!({"kind": "adamw"});
    v["model"]["mup"] = false.into();
    v["schedule"]["max_lr"] = 1e300.into();
    let cfg = write(dir.path(), "boom.json", &v);
    let out = muonbench(&dir.path().join("ws"), &["train", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn sweep_emits_every_cell_and_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let cfg = write(dir.path(), "sweep.json", &sweep_config());
    let out = muonbench(&ws, &["--jobs", "2", "sweep-batch", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let sweep_dir = fs::read_dir(ws.join("analysis")).unwrap().next().unwrap().unwrap().path();
    let runs = fs::read_to_string(sweep_dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 12);
    assert_eq!(fs::read_dir(ws.join("runs")).unwrap().count(), 12);
    for i in 0..3 {
        let t = sweep_dir.join(format!("threshold-{i}"));
        for f in [
            "curve_adamw.csv",
            "curve_muon.csv",
            "token_ratio.csv",
            "token_optimal.csv",
            "piecewise.json",
            "frontier_adamw.csv",
            "frontier_muon.csv",
            "steps.svg",
            "tokens.svg",
            "frontier.svg",
            "token_ratio.svg",
            "summary.json",
        ] {
            assert!(t.join(f).exists(), "missing {}", t.join(f).display());
        }
        let s = read_json(&t.join("summary.json"));
        assert!(s["error"].is_null(), "{}", s["error"]);
    }

    // A second invocation reuses every run and reproduces the analysis.
    let summary = fs::read_to_string(sweep_dir.join("threshold-1/token_ratio.csv")).unwrap();
    let again = muonbench(&ws, &["sweep-batch", cfg.to_str().unwrap()]);
    assert!(again.status.success());
    assert!(stdout(&again).contains("12 cached"), "{}", stdout(&again));
    assert_eq!(fs::read_to_string(sweep_dir.join("threshold-1/token_ratio.csv")).unwrap(), summary);
}

#[test]
fn unreachable_threshold_exits_4_with_best_loss() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = sweep_config();
    v["batch_sizes"] = serde_json::json!([32, 64]);
    v["thresholds"] = serde_json::json!([0.35, 1e-9]);
    let cfg = write(dir.path(), "sweep.json", &v);
    let out = muonbench(&dir.path().join("ws"), &["sweep-batch", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("lowest smoothed loss"), "{}", stderr(&out));
}

#[test]
fn sweep_config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = sweep_config();
    v["batch_sizes"] = serde_json::json!([8, 4]);
    let cfg = write(dir.path(), "sweep.json", &v);
    let out = muonbench(&dir.path().join("ws"), &["sweep-batch", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("batch_sizes"));
}

#[test]
fn telescope_writes_ledger_and_levels() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let cfg = write(dir.path(), "tel.json", &telescope_config());
    let out = muonbench(&ws, &["telescope", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("compute saved:") && text.contains("compute on final run:"), "{text}");
    let tdir = fs::read_dir(ws.join("analysis")).unwrap().next().unwrap().unwrap().path();
    for f in ["level-0.json", "level-1.json", "ledger.json", "outcome.json", "loss_distribution.csv", "powerlaw.json"] {
        assert!(tdir.join(f).exists(), "missing {f}");
    }
    let ledger = read_json(&tdir.join("ledger.json"));
    // Levels: 3² points at width 8, then 2² at width 16 (3/2 rounded half-up).
    let costs: Vec<u64> = ledger["level_costs"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).collect();
    assert_eq!(costs, vec![9 * 64 * 30, 4 * 256 * 30]);
    assert_eq!(ledger["final_cost"].as_u64(), Some(32 * 32 * 30));
}

#[test]
fn check_suite_exits_0_and_writes_junit() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("frontier.xml");
    let out = muonbench(&dir.path().join("ws"), &["check", "frontier", "--report", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("PASS"));
    let xml = fs::read_to_string(report).unwrap();
    assert!(xml.contains("<testsuite") && xml.contains("failures=\"0\""), "{xml}");
}
