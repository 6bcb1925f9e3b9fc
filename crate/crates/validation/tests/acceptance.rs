//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned
//! below. Exits non-zero when any criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use muonbench_cli::checks::{ns_corpus_matrix, NS_CORPUS};
use muonbench_cli::config::SweepConfig;
use muonbench_cli::presets;
use muonbench_cli::store::{RunStore, Workspace};
use muonbench_cli::sweep::run_sweep;
use muonbench_core::batchlab::{
    fit_piecewise, pareto_indices, ratio_log_slope, ratio_model, slope_minus_one_check, PiecewiseFit, SweepCurve,
};
use muonbench_core::matops::{newton_schulz, svd, Matrix, NewtonSchulzConfig};
use muonbench_core::model::{backward, forward, train, Activation, Batch, MlpSpec};
use muonbench_core::mup::{drift_coefficient, fit_drift};
use muonbench_core::optim::{shampoo_point_update, soap_point_update};
use muonbench_core::telescope::{powerlaw_fit, run_cost, run_telescope, TelescopeConfig};
use muonbench_validation as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

// Criterion 1.
const NS_BAND: (f64, f64) = (0.7, 1.3);
const NS_BUDGET: Duration = Duration::from_secs(5);
// Criterion 2.
const REDUCTION_TOL: f64 = 1e-8;
const REDUCTION_BUDGET: Duration = Duration::from_secs(10);
// Criterion 3.
const RMS_BAND: (f64, f64) = (0.14, 0.26);
// Criterion 4.
const GRAD_TOL: f64 = 1e-4;
const GRAD_COORDS: usize = 1000;
const GRAD_BUDGET: Duration = Duration::from_secs(30);
// Criterion 5.
const B_STAR_REL: f64 = 0.05;
const M_TOL_NOISELESS: f64 = 0.01;
const M_TOL_NOISY: f64 = 0.05;
// Criterion 6.
const BRANCH_SLOPE_TOL: f64 = 1e-6;
// Criterion 7.
const LEFT_EXPONENT_TOL: f64 = 0.02;
// Criterion 8.
const FRONTIER_BUDGET: Duration = Duration::from_secs(5);
// Criterion 9.
const COST_GAP_UNITS: f64 = 1.0;
const LEDGER_TOL: f64 = 1e-12;
// Criterion 10.
const DRIFT_FIT_TOL: f64 = 1e-3;
const DRIFT_COEF_TOL: f64 = 1e-6;
// Criterion 11.
const POWERLAW_TOL: (f64, f64, f64) = (0.02, 0.01, 0.005);
// Criterion 12.
const LR_POINTS_PER_DECADE: usize = 8;
const TRANSFER_CELLS: f64 = 1.0;
const TRANSFER_BUDGET: Duration = Duration::from_secs(20 * 60);
// Criterion 13.
const CONSISTENCY_TOL: f64 = 1e-12;
const SWEEP_BUDGET: Duration = Duration::from_secs(30 * 60);

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn timed(budget: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let t = Instant::now();
    let v = f();
    let el = t.elapsed();
    verdict(
        v.passed && el < budget,
        format!("{}; {:.2}s (budget {}s)", v.detail, el.as_secs_f64(), budget.as_secs()),
    )
}

fn corpus() -> Vec<(u64, Matrix)> {
    NS_CORPUS.map(|s| (s, ns_corpus_matrix(s))).collect()
}

fn ns_flattening() -> Verdict {
    let corpus = corpus();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut bad = Vec::new();
    let t = Instant::now();
    let outs: Vec<(u64, Matrix)> = corpus.iter().map(|(s, g)| (*s, newton_schulz(g, &NewtonSchulzConfig::default()))).collect();
    let el = t.elapsed();
    for (s, o) in &outs {
        let sv = oracle::singular_values(o);
        let (a, b) = (sv[sv.len() - 1], sv[0]);
        lo = lo.min(a);
        hi = hi.max(b);
        if !(a > NS_BAND.0 && b < NS_BAND.1) {
            bad.push(*s);
        }
    }
    verdict(
        bad.is_empty() && el < NS_BUDGET,
        format!(
            "singular values span [{lo:.4}, {hi:.4}], required inside {NS_BAND:?}; {} of {} outside; NS time {:.2}s",
            bad.len(),
            outs.len(),
            el.as_secs_f64()
        ),
    )
}

fn reduction_equivalence() -> Verdict {
    timed(REDUCTION_BUDGET, || {
        let mut worst = 0.0f64;
        for (_, g) in corpus() {
            let svd_polar = svd(&g).unwrap().polar();
            let gram_polar = oracle::polar(&g);
            let sh = shampoo_point_update(&g).unwrap();
            let so = soap_point_update(&g).unwrap();
            for (a, b) in [(&sh, &so), (&sh, &svd_polar), (&so, &svd_polar), (&svd_polar, &gram_polar)] {
                worst = worst.max(a.sub(b).max_abs());
            }
        }
        verdict(worst <= REDUCTION_TOL, format!("max pairwise gap {worst:.2e} (bound {REDUCTION_TOL:e})"))
    })
}

fn scaled_rms() -> Verdict {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut bad = Vec::new();
    for (s, g) in corpus() {
        let o = newton_schulz(&g, &NewtonSchulzConfig::default());
        let scale = 0.2 * (g.rows().max(g.cols()) as f64).sqrt();
        let n = (g.rows() * g.cols()) as f64;
        let rms = (o.data().iter().map(|v| (scale * v).powi(2)).sum::<f64>() / n).sqrt();
        lo = lo.min(rms);
        hi = hi.max(rms);
        if !(RMS_BAND.0..=RMS_BAND.1).contains(&rms) {
            bad.push(s);
        }
    }
    verdict(
        bad.is_empty(),
        format!("RMS spans [{lo:.4}, {hi:.4}], required {RMS_BAND:?}; failing seeds {bad:?}"),
    )
}

fn gradient_oracle() -> Verdict {
    timed(GRAD_BUDGET, || {
        let specs = [(1, false), (2, true), (3, true), (3, false)];
        let mut worst = 0.0f64;
        let mut checked = 0;
        for (i, &(depth, mup)) in specs.iter().enumerate() {
            let spec = MlpSpec {
                input_dim: 10,
                output_dim: 3,
                hidden_width: 24,
                depth,
                activation: Activation::Tanh,
                mup,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
            let mut params = spec.init_params(200 + i as u64);
            let batch = Batch {
                x: Matrix::random_normal(8, spec.input_dim, 1.0, &mut rng),
                y: Matrix::random_normal(8, spec.output_dim, 1.0, &mut rng),
                step: 0,
            };
            let (acts, _) = forward(&spec, &params, &batch).unwrap();
            let grads = backward(&spec, &params, &acts, &batch).unwrap();
            let h = 1e-6;
            for _ in 0..GRAD_COORDS / specs.len() {
                let l = rng.random_range(0..spec.num_layers());
                let (r, c) = (rng.random_range(0..grads[l].rows()), rng.random_range(0..grads[l].cols()));
                let w0 = params.layers[l][(r, c)];
                params.layers[l][(r, c)] = w0 + h;
                let up = oracle::mlp_loss(&spec, &params, &batch);
                params.layers[l][(r, c)] = w0 - h;
                let down = oracle::mlp_loss(&spec, &params, &batch);
                params.layers[l][(r, c)] = w0;
                let fd = (up - down) / (2.0 * h);
                let g = grads[l][(r, c)];
                worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
                checked += 1;
            }
        }
        verdict(worst <= GRAD_TOL, format!("{checked} coordinates, worst rel err {worst:.2e} (bound {GRAD_TOL:e})"))
    })
}

/// Steps for `B = 2^15 … 2^27` under breakpoint `b_star`, right slope `m` and
/// minimal tokens `t_star`, with multiplicative log-normal noise.
fn generated_curve(b_star: f64, m: f64, t_star: f64, noise: f64, seed: u64) -> SweepCurve {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(u64, u64)> = (15..=27)
        .map(|p| {
            let b = 2f64.powi(p);
            let s = if b <= b_star { t_star / b } else { t_star / b_star * (b / b_star).powf(m) };
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            (b as u64, (s * (noise * z).exp()).round() as u64)
        })
        .collect();
    SweepCurve::from_steps(0.0, pts).unwrap()
}

fn piecewise_round_trip() -> Verdict {
    let (b_star, m) = (2f64.powi(21), -0.5);
    let fit = fit_piecewise(&generated_curve(b_star, m, 2f64.powi(40), 0.0, 0)).unwrap();
    let b_err = (fit.b_star / b_star - 1.0).abs();
    let m_err = (fit.m - m).abs();
    let noisy = (0..50)
        .map(|s| (fit_piecewise(&generated_curve(b_star, m, 2f64.powi(40), 0.01, s)).unwrap().m - m).abs())
        .fold(0.0, f64::max);
    verdict(
        b_err <= B_STAR_REL && m_err <= M_TOL_NOISELESS && noisy <= M_TOL_NOISY,
        format!(
            "noiseless B* rel err {b_err:.2e} (≤ {B_STAR_REL}), |Δm| {m_err:.2e} (≤ {M_TOL_NOISELESS}); \
             1% noise max |Δm| over 50 seeds {noisy:.4} (≤ {M_TOL_NOISY})"
        ),
    )
}

fn ratio_branch_slopes() -> Verdict {
    let fa = fit_piecewise(&generated_curve(2f64.powi(18), -0.3, 2f64.powi(40), 0.0, 0)).unwrap();
    let fm = fit_piecewise(&generated_curve(2f64.powi(23), -0.6, 2f64.powi(39), 0.0, 0)).unwrap();
    let log_r = |x: f64| ratio_model(&fa, &fm, 2f64.powf(x)).unwrap().ln();
    let mut worst = 0.0f64;
    for (x, want) in [(16.0, 0.0), (20.5, fa.m + 1.0), (25.5, fa.m - fm.m)] {
        let h = 1e-4;
        let slope = (log_r(x + h) - log_r(x - h)) / (2.0 * h * 2f64.ln());
        worst = worst.max((slope - want).abs());
    }
    // Beyond both breakpoints R is constant exactly when the right slopes agree.
    let mut iff = true;
    for ma in [-0.8, -0.5, -0.2] {
        for mm in [-0.8, -0.5, -0.2] {
            let a = PiecewiseFit::from_params(1e3, ma, 1e9);
            let m = PiecewiseFit::from_params(1e4, mm, 8e8);
            let slope_zero = [1e5, 1e6, 1e8].iter().all(|&b| ratio_log_slope(&a, &m, b).unwrap() == 0.0);
            let flat = ratio_model(&a, &m, 1e5).unwrap() == ratio_model(&a, &m, 1e8).unwrap();
            iff &= slope_zero == (ma == mm) && (ma != mm || flat);
        }
    }
    verdict(
        worst <= BRANCH_SLOPE_TOL && iff,
        format!("max branch-slope error {worst:.2e} (bound {BRANCH_SLOPE_TOL:e}); constant iff m_A = m_M: {iff}"),
    )
}

fn slope_minus_one() -> Verdict {
    let pts: Vec<(u64, u64)> = (10..=20).map(|p| (1u64 << p, 1u64 << (30 - p))).collect();
    let curve = SweepCurve::from_steps(0.0, pts.clone()).unwrap();
    let fit = fit_piecewise(&curve).unwrap();
    let report = slope_minus_one_check(&fit, &curve);
    let x: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| (p.1 as f64).ln()).collect();
    let exponent = oracle::ols_slope(&x, &y) + 1.0;
    verdict(
        report.left_exponent.abs() <= LEFT_EXPONENT_TOL && exponent.abs() <= LEFT_EXPONENT_TOL,
        format!(
            "left token exponent {:.2e} over {} points, independent OLS {exponent:.2e} (bound ±{LEFT_EXPONENT_TOL})",
            report.left_exponent, report.left_points
        ),
    )
}

fn pareto_frontier() -> Verdict {
    timed(FRONTIER_BUDGET, || {
        let mut bad = Vec::new();
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=200);
            let lattice = seed % 3 == 0;
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    if lattice {
                        (rng.random_range(0..12) as f64, rng.random_range(0..12) as f64)
                    } else {
                        (rng.random::<f64>(), rng.random::<f64>())
                    }
                })
                .collect();
            if pareto_indices(&pts) != oracle::pareto(&pts) {
                bad.push(seed);
            }
        }
        verdict(bad.is_empty(), format!("1000 point sets, mismatching seeds {bad:?}"))
    })
}

fn telescope_arithmetic() -> Verdict {
    let objective = |n: usize, p: &[f64]| {
        let n = n as f64;
        (p[0] - 1.0 + 0.3 / n).powi(2) + (p[1] - 2.0).powi(2) + 1.0 / n
    };

    let mut gap = 0.0f64;
    for k in 1..=3usize {
        let cfg = TelescopeConfig {
            base_width: 32,
            calibration_width: 512,
            final_width: 512,
            initial_points: 16,
            ranges: vec![(0.0, 1.0); k],
            steps: 10,
            final_steps: None,
        };
        let mut p = cfg.initial_points as f64;
        let mut costs = Vec::new();
        let mut w = cfg.base_width;
        while w <= cfg.calibration_width {
            costs.push(p.powi(k as i32) * (w * w) as f64 * cfg.steps as f64);
            p *= 4f64.powf(-1.0 / k as f64);
            w *= 2;
        }
        for c in &costs {
            gap = gap.max((c - costs[0]).abs());
        }
    }

    let cfg = TelescopeConfig {
        base_width: 64,
        calibration_width: 256,
        final_width: 512,
        initial_points: 8,
        ranges: vec![(-1.0, 3.0), (0.0, 4.0)],
        steps: 100,
        final_steps: Some(400),
    };
    let out = run_telescope(&cfg, &objective).unwrap();
    // Brute force: every logged run at its width, plus the final run.
    let runs: u128 = out.levels.iter().flat_map(|l| l.results.iter().map(move |_| (l.width as u128).pow(2) * 100)).sum();
    let final_cost = 512u128 * 512 * 400;
    let full = 64u128 * 512 * 512 * 100 + final_cost;
    let saved = 100.0 * (1.0 - (runs + final_cost) as f64 / full as f64);
    let on_final = 100.0 * final_cost as f64 / (runs + final_cost) as f64;
    let ledger_err = (out.ledger.percent_saved - saved).abs().max((out.ledger.percent_on_final - on_final).abs());
    let ledger_ok = ledger_err <= LEDGER_TOL && out.ledger.final_cost == run_cost(512, 400);

    let last = out.levels.last().unwrap();
    let target = [1.0 - 0.3 / 256.0, 2.0];
    let within = out
        .selected
        .iter()
        .zip(&target)
        .zip(&last.axes)
        .all(|((x, t), a)| (x - t).abs() <= a.spacing * (1.0 + 1e-12));
    verdict(
        gap <= COST_GAP_UNITS && ledger_ok && within,
        format!(
            "per-level cost gap {gap:.2e} units (≤ {COST_GAP_UNITS}); ledger err {ledger_err:.1e} (≤ {LEDGER_TOL:e}), \
             saved {saved:.4}%; selected {:?} vs width-Nc optimum {target:?}, within one cell: {within}",
            out.selected
        ),
    )
}

fn drift_recovery() -> Verdict {
    // argmin_x (x − 1)² + x/n = 1 − 1/(2n).
    let widths = [64.0, 128.0, 256.0, 512.0];
    let argmins: Vec<f64> = widths.iter().map(|n| 1.0 - 0.5 / n).collect();
    let fit = fit_drift(&widths, &argmins).unwrap();
    let alpha = drift_coefficient(|x| (x - 1.0).powi(2), |x| x, |l| l, 1.0).unwrap();
    verdict(
        (fit.x_star_inf - 1.0).abs() <= DRIFT_FIT_TOL
            && (fit.alpha + 0.5).abs() <= DRIFT_FIT_TOL
            && (alpha + 0.5).abs() <= DRIFT_COEF_TOL,
        format!(
            "fit x* = {:.6}, alpha = {:.6} (tol {DRIFT_FIT_TOL:e}); drift_coefficient {alpha:.9} (tol {DRIFT_COEF_TOL:e})",
            fit.x_star_inf, fit.alpha
        ),
    )
}

fn powerlaw_recovery() -> Verdict {
    let sizes: Vec<f64> = (0..9).map(|i| 10f64.powf(5.0 + 0.5 * i as f64)).collect();
    let losses: Vec<f64> = sizes.iter().map(|d| 10.0 / d.powf(0.31) + 1.31).collect();
    let fit = powerlaw_fit(&sizes, &losses).unwrap();
    let (ea, eal, ee) = ((fit.a / 10.0 - 1.0).abs(), (fit.alpha - 0.31).abs(), (fit.e / 1.31 - 1.0).abs());
    verdict(
        ea <= POWERLAW_TOL.0 && eal <= POWERLAW_TOL.1 && ee <= POWERLAW_TOL.2,
        format!("A = {:.4}, alpha = {:.5}, E = {:.5} (tolerances {POWERLAW_TOL:?})", fit.a, fit.alpha, fit.e),
    )
}

fn lr_argmin(width: usize, mup: bool, grid: &[f64]) -> f64 {
    let losses: Vec<f64> = grid
        .par_iter()
        .map(|&x| {
            let trace = train(&presets::transfer_run(width, mup, presets::muon(), x)).unwrap();
            if trace.diverged {
                f64::INFINITY
            } else {
                trace.final_smoothed().unwrap_or(f64::INFINITY)
            }
        })
        .collect();
    let i = (0..grid.len()).min_by(|&i, &j| losses[i].total_cmp(&losses[j])).unwrap();
    grid[i]
}

fn mup_transfer() -> Verdict {
    timed(TRANSFER_BUDGET, || {
        let cell = 1.0 / LR_POINTS_PER_DECADE as f64;
        let grid: Vec<f64> = (0..=3 * LR_POINTS_PER_DECADE).map(|i| -3.0 + i as f64 * cell).collect();
        let gap = |mup: bool| {
            let (a, b) = (lr_argmin(64, mup, &grid), lr_argmin(512, mup, &grid));
            (a, b, ((a - b).abs() / cell).round())
        };
        let (m64, m512, mcells) = gap(true);
        let (s64, s512, scells) = gap(false);
        verdict(
            mcells <= TRANSFER_CELLS && scells > TRANSFER_CELLS,
            format!(
                "log10 lr argmin muP {m64:.3} → {m512:.3} ({mcells} cells); standard {s64:.3} → {s512:.3} ({scells} cells); \
                 required muP ≤ {TRANSFER_CELLS} and standard > {TRANSFER_CELLS}"
            ),
        )
    })
}

fn read_csv(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn end_to_end_sweep() -> Verdict {
    timed(SWEEP_BUDGET, || {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        let store = RunStore::new(&ws, false);
        let cfg: SweepConfig = serde_json::from_value(serde_json::json!({
            "base": {
                "model": {"input_dim": 16, "output_dim": 4, "hidden_width": 32, "depth": 2, "mup": true},
                "task": {"teacher_seed": 11, "data_seed": 12, "teacher_width": 256},
                "optimizer": {"kind": "muon"},
                "schedule": {"max_lr": 0.02, "warmup_steps": 5},
                "batch_size": 16,
                "total_steps": 40,
                "run_seed": 13
            },
            "optimizers": [
                {"name": "adamw", "optimizer": {"kind": "adamw"}, "max_lr": 0.01},
                {"name": "muon", "optimizer": {"kind": "muon"}, "max_lr": 0.02}
            ],
            "batch_sizes": [4, 8, 16, 32, 64, 128],
            "thresholds": [0.35, 0.25, 0.15],
            "sample_budget": 8192,
            "trace_points": 100
        }))
        .unwrap();
        cfg.validate().unwrap();
        let out = match run_sweep(&ws, &store, &cfg) {
            Ok(o) => o,
            Err(e) => return verdict(false, format!("sweep failed: {e}")),
        };
        let mut tok_err = 0.0f64;
        let mut ratio_err = 0.0f64;
        let mut missing = Vec::new();
        let mut ordering = Vec::new();
        for i in 0..cfg.thresholds.len() {
            let t = out.dir.join(format!("threshold-{i}"));
            for f in ["curve_adamw.csv", "curve_muon.csv", "token_ratio.csv", "frontier_adamw.csv", "frontier_muon.csv"] {
                if !t.join(f).exists() {
                    missing.push(format!("threshold-{i}/{f}"));
                }
            }
            if !missing.is_empty() {
                continue;
            }
            for name in ["adamw", "muon"] {
                for row in read_csv(&t.join(format!("curve_{name}.csv"))) {
                    if row[3] == "true" {
                        let (b, s, tk): (f64, f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap(), row[2].parse().unwrap());
                        tok_err = tok_err.max((tk - b * s).abs());
                    }
                }
            }
            let rows = read_csv(&t.join("token_ratio.csv"));
            let mut wins = 0;
            for row in &rows {
                let v: Vec<f64> = row[1..].iter().map(|x| x.parse().unwrap()).collect();
                let (ta, tm, r, adv) = (v[0], v[1], v[2], v[4]);
                ratio_err = ratio_err.max((r - 1.0 - adv / tm).abs()).max((r - ta / tm).abs());
                wins += (ta > tm) as usize;
            }
            ordering.push(format!("L={}: Muon fewer tokens at {wins}/{} batches", cfg.thresholds[i], rows.len()));
        }
        verdict(
            missing.is_empty() && tok_err <= CONSISTENCY_TOL && ratio_err <= CONSISTENCY_TOL && out.summary.cells.len() == 12,
            format!(
                "{} runs; missing {missing:?}; max |T − B·S| {tok_err:.1e}, max |R − 1 − ΔT/T_M| {ratio_err:.1e} \
                 (bound {CONSISTENCY_TOL:e}); descriptive: {}",
                out.summary.cells.len(),
                ordering.join(", ")
            ),
        )
    })
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 13] = [
        ("newton_schulz_flattening", ns_flattening),
        ("reduction_equivalence", reduction_equivalence),
        ("scaled_update_rms", scaled_rms),
        ("gradient_oracle", gradient_oracle),
        ("piecewise_round_trip", piecewise_round_trip),
        ("token_ratio_branch_slopes", ratio_branch_slopes),
        ("slope_minus_one", slope_minus_one),
        ("pareto_frontier", pareto_frontier),
        ("telescope_arithmetic", telescope_arithmetic),
        ("drift_recovery", drift_recovery),
        ("powerlaw_fit", powerlaw_recovery),
        ("mup_transfer", mup_transfer),
        ("end_to_end_sweep", end_to_end_sweep),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let v = f();
        println!("{} {:>2} {name}: {}", if v.passed { "PASS" } else { "FAIL" }, i + 1, v.detail);
        if !v.passed {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
