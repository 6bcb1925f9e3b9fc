//! `check <suite>`: invariant suites over every module, reported as JUnit XML.
//!
//! Every case is seeded; failures list the seeds that reproduce them.

use std::fmt::Write as _;
use std::time::Instant;

use clap::ValueEnum;
use muonbench_core::batchlab::{
    fit_piecewise, pareto_indices, ratio_log_slope, slope_minus_one_check, PiecewiseFit, SweepCurve,
};
use muonbench_core::matops::{newton_schulz, singular_value_range, svd, Matrix, NewtonSchulzConfig};
use muonbench_core::model::{backward, forward, Activation, Batch, MlpSpec};
use muonbench_core::mup::{
    coordinate_check, drift_coefficient, fit_drift, golden_section_min, refine_argmin, scaling_for, spectral_check,
    spread_by_layer, LayerClass,
};
use muonbench_core::optim::{shampoo_point_update, soap_point_update, MuonHyper};
use muonbench_core::telescope::{compute_ledger, powerlaw_fit, run_cost, run_telescope, TelescopeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Ns,
    Reduction,
    Grad,
    Mup,
    Drift,
    Fit,
    Frontier,
    Ledger,
    All,
}

impl Suite {
    pub const ORDER: [Suite; 8] = [
        Suite::Ns,
        Suite::Reduction,
        Suite::Grad,
        Suite::Mup,
        Suite::Drift,
        Suite::Fit,
        Suite::Frontier,
        Suite::Ledger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ns => "ns",
            Suite::Reduction => "reduction",
            Suite::Grad => "grad",
            Suite::Mup => "mup",
            Suite::Drift => "drift",
            Suite::Fit => "fit",
            Suite::Frontier => "frontier",
            Suite::Ledger => "ledger",
            Suite::All => "all",
        }
    }

    /// Concrete suites in deterministic order.
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => Self::ORDER.to_vec(),
            s => vec![s],
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckCase {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub failing_seeds: Vec<u64>,
    pub secs: f64,
}

fn case(suite: &'static str, name: &'static str, f: impl FnOnce() -> (bool, String, Vec<u64>)) -> CheckCase {
    let start = Instant::now();
    let (passed, detail, failing_seeds) = f();
    CheckCase {
        suite,
        name,
        passed,
        detail,
        failing_seeds,
        secs: start.elapsed().as_secs_f64(),
    }
}

pub fn run_suite(suite: Suite) -> Vec<CheckCase> {
    suite
        .expand()
        .into_iter()
        .flat_map(|s| match s {
            Suite::Ns => ns_suite(),
            Suite::Reduction => reduction_suite(),
            Suite::Grad => grad_suite(),
            Suite::Mup => mup_suite(),
            Suite::Drift => drift_suite(),
            Suite::Fit => fit_suite(),
            Suite::Frontier => frontier_suite(),
            Suite::Ledger => ledger_suite(),
            Suite::All => unreachable!(),
        })
        .collect()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn junit_xml(cases: &[CheckCase]) -> String {
    let failures = cases.iter().filter(|c| !c.passed).count();
    let total: f64 = cases.iter().map(|c| c.secs).sum();
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        r#"<testsuites name="muonbench-check" tests="{}" failures="{failures}" time="{total:.3}">"#,
        cases.len()
    );
    let mut suites: Vec<&str> = Vec::new();
    for c in cases {
        if !suites.contains(&c.suite) {
            suites.push(c.suite);
        }
    }
    for suite in suites {
        let members: Vec<&CheckCase> = cases.iter().filter(|c| c.suite == suite).collect();
        let _ = writeln!(
            s,
            r#"  <testsuite name="{suite}" tests="{}" failures="{}" time="{:.3}">"#,
            members.len(),
            members.iter().filter(|c| !c.passed).count(),
            members.iter().map(|c| c.secs).sum::<f64>()
        );
        for c in members {
            let _ = write!(s, r#"    <testcase classname="{suite}" name="{}" time="{:.3}""#, c.name, c.secs);
            if c.passed {
                let _ = writeln!(s, ">\n      <system-out>{}</system-out>\n    </testcase>", xml_escape(&c.detail));
            } else {
                let seeds: Vec<String> = c.failing_seeds.iter().map(|s| s.to_string()).collect();
                let _ = writeln!(
                    s,
                    ">\n      <failure message=\"{}\">seeds: [{}]</failure>\n    </testcase>",
                    xml_escape(&c.detail),
                    seeds.join(", ")
                );
            }
        }
        s.push_str("  </testsuite>\n");
    }
    s.push_str("</testsuites>\n");
    s
}

// ---------------------------------------------------------------- corpora

/// Seeded full-rank matrix with shape up to 64×128 and condition number ≤ 10.
pub fn ns_corpus_matrix(seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.random_range(2..=64);
    let cols = rng.random_range(2..=128);
    let cond = rng.random_range(1.0..=10.0);
    Matrix::random_conditioned(rows, cols, cond, &mut rng).expect("valid corpus parameters")
}

pub const NS_CORPUS: std::ops::Range<u64> = 0..100;

fn polar_error(g: &Matrix, cfg: &NewtonSchulzConfig) -> f64 {
    let polar = svd(g).expect("finite corpus").polar();
    let k = g.rows().min(g.cols()) as f64;
    newton_schulz(g, cfg).sub(&polar).frobenius_norm() / k.sqrt()
}

fn worst<I: IntoIterator<Item = (u64, f64)>>(items: I, ok: impl Fn(f64) -> bool) -> (f64, Vec<u64>) {
    let mut max = f64::NEG_INFINITY;
    let mut bad = Vec::new();
    for (seed, v) in items {
        max = max.max(v);
        if !ok(v) {
            bad.push(seed);
        }
    }
    (max, bad)
}

// ---------------------------------------------------------------- suites

fn ns_suite() -> Vec<CheckCase> {
    const S: &str = "ns";
    let default = NewtonSchulzConfig::default();
    vec![
        case(S, "singular_values_in_band", || {
            let (mut lo, mut hi, mut bad) = (f64::INFINITY, 0.0f64, Vec::new());
            for seed in NS_CORPUS {
                let (a, b) = singular_value_range(&newton_schulz(&ns_corpus_matrix(seed), &default)).unwrap();
                lo = lo.min(a);
                hi = hi.max(b);
                if !(a > 0.7 && b < 1.3) {
                    bad.push(seed);
                }
            }
            (
                bad.is_empty(),
                format!("output singular values span [{lo:.4}, {hi:.4}], required inside (0.7, 1.3)"),
                bad,
            )
        }),
        case(S, "polar_agreement_5_steps", || {
            let (max, bad) = worst(NS_CORPUS.map(|s| (s, polar_error(&ns_corpus_matrix(s), &default))), |e| e <= 0.3);
            (bad.is_empty(), format!("max normalized distance to UV^T {max:.4} (bound 0.3)"), bad)
        }),
        case(S, "polar_agreement_15_steps", || {
            let cubic = NewtonSchulzConfig::cubic(15);
            let (max, bad) = worst(NS_CORPUS.map(|s| (s, polar_error(&ns_corpus_matrix(s), &cubic))), |e| e <= 0.05);
            (bad.is_empty(), format!("cubic iteration, max normalized distance {max:.2e} (bound 0.05)"), bad)
        }),
        case(S, "transpose_consistency", || {
            let (max, bad) = worst(
                (0..50).map(|s| {
                    let g = ns_corpus_matrix(s);
                    let a = newton_schulz(&g.transpose(), &default);
                    let b = newton_schulz(&g, &default).transpose();
                    (s, a.sub(&b).max_abs())
                }),
                |d| d <= 1e-12,
            );
            (bad.is_empty(), format!("max |NS(g^T) - NS(g)^T| = {max:.2e} (bound 1e-12)"), bad)
        }),
        case(S, "scaled_update_rms", || {
            let hyper = MuonHyper::default();
            let (mut lo, mut hi, mut bad) = (f64::INFINITY, 0.0f64, Vec::new());
            for seed in NS_CORPUS {
                let g = ns_corpus_matrix(seed);
                let rms = newton_schulz(&g, &hyper.ns).scale(hyper.update_scale(g.rows(), g.cols())).rms();
                lo = lo.min(rms);
                hi = hi.max(rms);
                if !(0.14..=0.26).contains(&rms) {
                    bad.push(seed);
                }
            }
            (bad.is_empty(), format!("update RMS spans [{lo:.4}, {hi:.4}], required in [0.14, 0.26]"), bad)
        }),
    ]
}

fn reduction_suite() -> Vec<CheckCase> {
    vec![case("reduction", "shampoo_soap_polar_agree", || {
        let (max, bad) = worst(
            NS_CORPUS.map(|s| {
                let g = ns_corpus_matrix(s);
                let polar = svd(&g).unwrap().polar();
                let sh = shampoo_point_update(&g).unwrap();
                let so = soap_point_update(&g).unwrap();
                let d = sh.sub(&so).max_abs().max(sh.sub(&polar).max_abs()).max(so.sub(&polar).max_abs());
                (s, d)
            }),
            |d| d <= 1e-8,
        );
        (bad.is_empty(), format!("max pairwise max-norm gap {max:.2e} (bound 1e-8)"), bad)
    })]
}

/// `|g − fd| / max(|g|, |fd|, 1e-6)`: relative error, with an absolute floor
/// for coordinates whose gradient is essentially zero.
pub fn gradient_rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares sampled coordinates of the analytic MLP gradient against central
/// differences with step `1e-6`; returns the worst relative error.
pub fn gradient_check(spec: &MlpSpec, seed: u64, coords: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = spec.init_params(seed);
    let batch = Batch {
        x: Matrix::random_normal(8, spec.input_dim, 1.0, &mut rng),
        y: Matrix::random_normal(8, spec.output_dim, 1.0, &mut rng),
        step: 0,
    };
    let (acts, _) = forward(spec, &params, &batch).unwrap();
    let grads = backward(spec, &params, &acts, &batch).unwrap();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let l = rng.random_range(0..spec.num_layers());
        let (r, c) = (rng.random_range(0..grads[l].rows()), rng.random_range(0..grads[l].cols()));
        let orig = params.layers[l][(r, c)];
        params.layers[l][(r, c)] = orig + h;
        let up = forward(spec, &params, &batch).unwrap().1;
        params.layers[l][(r, c)] = orig - h;
        let down = forward(spec, &params, &batch).unwrap().1;
        params.layers[l][(r, c)] = orig;
        worst = worst.max(gradient_rel_err(grads[l][(r, c)], (up - down) / (2.0 * h)));
    }
    worst
}

fn grad_suite() -> Vec<CheckCase> {
    vec![case("grad", "finite_difference_oracle", || {
        let specs = [(false, 1), (true, 1), (false, 3), (true, 3)];
        let (max, bad) = worst(
            specs.iter().enumerate().map(|(i, &(mup, depth))| {
                let spec = MlpSpec {
                    input_dim: 6,
                    output_dim: 3,
                    hidden_width: 16,
                    depth,
                    activation: Activation::Tanh,
                    mup,
                };
                (i as u64, gradient_check(&spec, i as u64, 250))
            }),
            |e| e <= 1e-4,
        );
        (bad.is_empty(), format!("1000 coordinates, worst relative error {max:.2e} (bound 1e-4)"), bad)
    })]
}

/// Calibration-frozen bounds on the max/min spread across widths.
pub const COORD_INIT_SPREAD: f64 = 2.0;
pub const COORD_TRAINED_SPREAD: f64 = 3.0;
pub const SPECTRAL_SPREAD: f64 = 4.0;

fn max_spread(s: &[(usize, f64)]) -> f64 {
    s.iter().map(|x| x.1).fold(1.0, f64::max)
}

fn mup_suite() -> Vec<CheckCase> {
    const S: &str = "mup";
    let base = presets::small_run(64, presets::muon(), 0.02);
    vec![
        case(S, "table_closure", || {
            let mut bad = Vec::new();
            for (i, &(fi, fo)) in [(1, 1), (64, 256), (256, 1024), (512, 4), (7, 3)].iter().enumerate() {
                let (fin, fout) = (fi as f64, fo as f64);
                let want = [
                    (LayerClass::Input, fout.sqrt(), 1.0 / fout, 1.0 / fout.sqrt()),
                    (LayerClass::Output, 1.0 / fin.sqrt(), 1.0 / fin, 1.0 / fin.sqrt()),
                    (LayerClass::Hidden, 1.0, 1.0 / fin, 1.0 / fin),
                ];
                for (class, a, b, c) in want {
                    let s = scaling_for(class, fi, fo);
                    if s.multiplier != a || s.init_variance != b || s.lr_scale != c {
                        bad.push(i as u64);
                    }
                }
            }
            (bad.is_empty(), "multiplier, init variance and lr scale per layer class".into(), bad)
        }),
        case(S, "coordinate_check_init", || {
            let rows = coordinate_check(&base, &[64, 128, 256], 0, 7).unwrap();
            // At init the muP output layer shrinks as n^{-1/2} by construction
            // (multiplier 1/sqrt(n), variance 1/n); the bound is on hidden activations.
            let depth = base.model.depth;
            let spread = max_spread(&spread_by_layer(
                rows.iter().filter(|r| r.layer < depth).map(|r| (r.layer, Some(r.rms_init))),
            ));
            let out = max_spread(&spread_by_layer(
                rows.iter().filter(|r| r.layer == depth).map(|r| (r.layer, Some(r.rms_init))),
            ));
            let ok = spread <= COORD_INIT_SPREAD;
            (
                ok,
                format!("widths 64-256, hidden max/min init RMS {spread:.3} (bound {COORD_INIT_SPREAD}); output {out:.3}, expected ~2"),
                bad_seed(ok, 7),
            )
        }),
        case(S, "coordinate_check_trained", || {
            let rows = coordinate_check(&base, &[64, 512], 50, 7).unwrap();
            let diverged = rows.iter().any(|r| r.diverged);
            let spread = max_spread(&spread_by_layer(rows.iter().map(|r| (r.layer, r.rms_trained))));
            let ok = !diverged && spread <= COORD_TRAINED_SPREAD;
            (
                ok,
                format!("widths 64/512 after 50 steps, max/min RMS {spread:.3} (bound {COORD_TRAINED_SPREAD}), diverged {diverged}"),
                bad_seed(ok, 7),
            )
        }),
        case(S, "spectral_check", || {
            let rows = spectral_check(&base.model, &[64, 1024], 7).unwrap();
            let spread = max_spread(&spread_by_layer(rows.iter().map(|r| (r.layer, Some(r.ratio)))));
            let ok = spread <= SPECTRAL_SPREAD;
            (ok, format!("widths 64/1024, max/min spectral ratio {spread:.3} (bound {SPECTRAL_SPREAD})"), bad_seed(ok, 7))
        }),
    ]
}

fn bad_seed(ok: bool, seed: u64) -> Vec<u64> {
    if ok {
        Vec::new()
    } else {
        vec![seed]
    }
}

fn drift_suite() -> Vec<CheckCase> {
    const S: &str = "drift";
    // ℓ(x, n) = (x − 1)² + x/n, minimized at x*(n) = 1 − 1/(2n).
    let loss = |x: f64, n: f64| (x - 1.0).powi(2) + x / n;
    vec![
        case(S, "fit_drift_closed_form", || {
            let widths = [64.0, 128.0, 256.0];
            let argmins: Vec<f64> = widths.iter().map(|n| 1.0 - 0.5 / n).collect();
            let fit = fit_drift(&widths, &argmins).unwrap();
            let ok = (fit.x_star_inf - 1.0).abs() <= 1e-3 && (fit.alpha + 0.5).abs() <= 1e-3;
            (ok, format!("x* = {:.6}, alpha = {:.6}", fit.x_star_inf, fit.alpha), Vec::new())
        }),
        case(S, "drift_coefficient_closed_form", || {
            let a = drift_coefficient(|x| (x - 1.0).powi(2), |x| x, |f| f, 1.0).unwrap();
            ((a + 0.5).abs() <= 1e-6, format!("alpha = {a:.9} (expected -0.5)"), Vec::new())
        }),
        case(S, "drift_consistency", || {
            let widths: Vec<f64> = (6..=10).map(|p| 2f64.powi(p)).collect();
            let argmins: Vec<f64> = widths
                .iter()
                .map(|&n| golden_section_min(|x| loss(x, n), 0.0, 2.0, 1e-12))
                .collect();
            let fitted = fit_drift(&widths, &argmins).unwrap().alpha;
            let analytic = drift_coefficient(|x| (x - 1.0).powi(2), |x| x, |f| f, 1.0).unwrap();
            let rel = (fitted - analytic).abs() / analytic.abs();
            (rel <= 0.05, format!("fitted {fitted:.6} vs analytic {analytic:.6}, rel {rel:.2e} (bound 5%)"), Vec::new())
        }),
        case(S, "mesh_refinement_stability", || {
            let mut bad = Vec::new();
            for seed in 0..50u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let c: f64 = rng.random_range(-2.0..2.0);
                let curv: f64 = rng.random_range(0.1..10.0);
                let spacing: f64 = rng.random_range(0.05..0.5);
                let f = |x: f64| curv * (x - c).powi(2) + 0.1 * (x - c).powi(4);
                // 101 points at spacing ≥ 0.05 always bracket the minimum.
                let ((coarse, _), (fine, _)) = refine_argmin(f, 0.0, spacing, 101).unwrap();
                if (fine - coarse).abs() > spacing * (1.0 + 1e-12) {
                    bad.push(seed);
                }
            }
            (bad.is_empty(), "halving the mesh moves the argmin by at most one coarse cell".into(), bad)
        }),
    ]
}

/// Steps-to-loss for `B = 2^lo … 2^hi` under a piecewise model, with
/// optional multiplicative log-normal noise.
pub fn synthetic_curve(model: &PiecewiseFit, lo: i32, hi: i32, noise: f64, seed: u64) -> SweepCurve {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(u64, u64)> = (lo..=hi)
        .map(|p| {
            let b = 2f64.powi(p);
            let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            (b as u64, (model.steps(b) * (noise * z).exp()).round() as u64)
        })
        .collect();
    SweepCurve::from_steps(0.0, pts).unwrap()
}

fn fit_suite() -> Vec<CheckCase> {
    const S: &str = "fit";
    let truth = PiecewiseFit::from_params(2f64.powi(21), -0.5, 2f64.powi(40));
    vec![
        case(S, "piecewise_noiseless", || {
            let fit = fit_piecewise(&synthetic_curve(&truth, 15, 27, 0.0, 0)).unwrap();
            let b_err = (fit.b_star / truth.b_star - 1.0).abs();
            let ok = b_err <= 0.05 && (fit.m - truth.m).abs() <= 0.01;
            (ok, format!("B* rel err {b_err:.2e}, m = {:.5}", fit.m), Vec::new())
        }),
        case(S, "piecewise_noisy", || {
            let (max, bad) = worst(
                (0..50).map(|s| {
                    let fit = fit_piecewise(&synthetic_curve(&truth, 15, 27, 0.01, s)).unwrap();
                    (s, (fit.m - truth.m).abs())
                }),
                |e| e <= 0.05,
            );
            (bad.is_empty(), format!("1% noise, 50 seeds, max |m - m_true| {max:.4} (bound 0.05)"), bad)
        }),
        case(S, "ratio_branch_slopes", || {
            let a = PiecewiseFit::from_params(2f64.powi(20), -0.3, 1e9);
            let m = PiecewiseFit::from_params(2f64.powi(23), -0.6, 8e8);
            let mut worst_err = 0.0f64;
            for (x, want) in [(17.0, 0.0), (21.5, a.m + 1.0), (26.0, a.m - m.m)] {
                let h = 1e-4;
                let lr = |x: f64| {
                    let b = 2f64.powf(x);
                    (a.tokens(b) / m.tokens(b)).ln()
                };
                let slope = (lr(x + h) - lr(x - h)) / (2.0 * h * 2f64.ln());
                let closed = ratio_log_slope(&a, &m, 2f64.powf(x)).unwrap();
                worst_err = worst_err.max((slope - want).abs()).max((closed - want).abs());
            }
            let same = PiecewiseFit::from_params(2f64.powi(20), -0.4, 1e9);
            let same_m = PiecewiseFit::from_params(2f64.powi(20), -0.4, 5e8);
            let flat = [15.0, 20.0, 25.0, 30.0]
                .iter()
                .all(|&x| ratio_log_slope(&same, &same_m, 2f64.powf(x)).unwrap() == 0.0);
            (
                worst_err <= 1e-6 && flat,
                format!("max slope error {worst_err:.2e} (bound 1e-6); constant ratio when slopes match: {flat}"),
                Vec::new(),
            )
        }),
        case(S, "perfect_scaling_slope", || {
            let curve = SweepCurve::from_steps(0.0, (10..=20).map(|p| (1u64 << p, 1u64 << (30 - p)))).unwrap();
            let fit = fit_piecewise(&curve).unwrap();
            let r = slope_minus_one_check(&fit, &curve);
            (
                r.left_exponent.abs() <= 0.02,
                format!("left token exponent {:.2e} over {} points (bound 0.02)", r.left_exponent, r.left_points),
                Vec::new(),
            )
        }),
        case(S, "powerlaw_recovery", || {
            let sizes: Vec<f64> = (0..5).map(|i| 10f64.powi(5 + i)).collect();
            let losses: Vec<f64> = sizes.iter().map(|d| 10.0 / d.powf(0.31) + 1.31).collect();
            let fit = powerlaw_fit(&sizes, &losses).unwrap();
            let ok = (fit.a / 10.0 - 1.0).abs() <= 0.02
                && (fit.alpha - 0.31).abs() <= 0.01
                && (fit.e / 1.31 - 1.0).abs() <= 0.005;
            (ok, format!("A = {:.4}, alpha = {:.5}, E = {:.5}", fit.a, fit.alpha, fit.e), Vec::new())
        }),
    ]
}

/// `O(n²)` dominance oracle: non-dominated points, earliest index among
/// exact duplicates, ordered by (compute, time).
pub fn brute_force_frontier(points: &[(f64, f64)]) -> Vec<usize> {
    let mut keep: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let p = points[i];
            !points.iter().enumerate().any(|(j, q)| {
                let dominates = q.0 <= p.0 && q.1 <= p.1 && (q.0 < p.0 || q.1 < p.1);
                dominates || (j < i && q == &p)
            })
        })
        .collect();
    keep.sort_by(|&i, &j| points[i].0.total_cmp(&points[j].0));
    keep
}

pub fn random_point_set(seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=200);
    // Coarse lattices force ties and duplicates in some sets.
    let lattice = seed % 3 == 0;
    (0..n)
        .map(|_| {
            if lattice {
                (rng.random_range(0..12) as f64, rng.random_range(0..12) as f64)
            } else {
                (rng.random::<f64>(), rng.random::<f64>())
            }
        })
        .collect()
}

fn frontier_suite() -> Vec<CheckCase> {
    vec![case("frontier", "matches_dominance_oracle", || {
        let bad: Vec<u64> = (0..1000u64)
            .filter(|&s| {
                let pts = random_point_set(s);
                pareto_indices(&pts) != brute_force_frontier(&pts)
            })
            .collect();
        (bad.is_empty(), "1000 random sets of up to 200 points".into(), bad)
    })]
}

/// Analytic telescope objective with a width-dependent optimum
/// `(1 − 0.3/n, 2)`.
pub fn analytic_objective(n: usize, p: &[f64]) -> f64 {
    let n = n as f64;
    (p[0] - 1.0 + 0.3 / n).powi(2) + (p[1] - 2.0).powi(2) + 1.0 / n
}

fn ledger_suite() -> Vec<CheckCase> {
    const S: &str = "ledger";
    vec![
        case(S, "brute_force_ledger", || {
            let cfg = TelescopeConfig {
                base_width: 64,
                calibration_width: 1024,
                final_width: 1024,
                initial_points: 8,
                ranges: vec![(-1.0, 3.0), (0.0, 4.0)],
                steps: 100,
                final_steps: Some(400),
            };
            let out = run_telescope(&cfg, &analytic_objective).unwrap();
            // Independent summation from the raw per-run log.
            let runs: u128 = out
                .levels
                .iter()
                .map(|l| l.results.iter().map(|_| (l.width as u128).pow(2) * 100).sum::<u128>())
                .sum();
            let final_cost = 1024u128 * 1024 * 400;
            let full = 64u128 * 1024 * 1024 * 100 + final_cost;
            let saved = 100.0 * (1.0 - (runs + final_cost) as f64 / full as f64);
            let on_final = 100.0 * final_cost as f64 / (runs + final_cost) as f64;
            let ok = (out.ledger.percent_saved - saved).abs() <= 1e-12
                && (out.ledger.percent_on_final - on_final).abs() <= 1e-12
                && out.ledger.level_costs.iter().sum::<u128>() == runs;
            (
                ok,
                format!(
                    "saved {:.6}% (oracle {saved:.6}%), on final {:.6}% (oracle {on_final:.6}%)",
                    out.ledger.percent_saved, out.ledger.percent_on_final
                ),
                Vec::new(),
            )
        }),
        case(S, "exact_cost_constancy", || {
            let mut worst = 0.0f64;
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
                let costs: Vec<f64> = cfg
                    .exact_points_per_level()
                    .iter()
                    .zip(cfg.level_widths())
                    .map(|(p, w)| p.powi(k as i32) * run_cost(w, cfg.steps) as f64)
                    .collect();
                for c in &costs {
                    worst = worst.max((c - costs[0]).abs());
                }
            }
            (worst <= 1.0, format!("max per-level cost gap {worst:.3e} cost units (bound 1)"), Vec::new())
        }),
        case(S, "analytic_selection", || {
            let cfg = TelescopeConfig {
                base_width: 64,
                calibration_width: 256,
                final_width: 512,
                initial_points: 8,
                ranges: vec![(-1.0, 3.0), (0.0, 4.0)],
                steps: 100,
                final_steps: None,
            };
            let out = run_telescope(&cfg, &analytic_objective).unwrap();
            let last = out.levels.last().unwrap();
            let target = [1.0 - 0.3 / 256.0, 2.0];
            let ok = out
                .selected
                .iter()
                .zip(&target)
                .zip(&last.axes)
                .all(|((x, t), a)| (x - t).abs() <= a.spacing * (1.0 + 1e-12));
            (ok, format!("selected {:?}, width-Nc optimum {target:?}", out.selected), Vec::new())
        }),
        case(S, "degenerate_plan", || {
            let cfg = TelescopeConfig {
                base_width: 64,
                calibration_width: 64,
                final_width: 64,
                initial_points: 4,
                ranges: vec![(0.0, 1.0)],
                steps: 10,
                final_steps: None,
            };
            let out = run_telescope(&cfg, &analytic_single).unwrap();
            let l = compute_ledger(&cfg, &out.levels, run_cost(64, 10)).unwrap();
            (l.percent_saved == 0.0, format!("saved {}% when the plan equals the full grid", l.percent_saved), Vec::new())
        }),
    ]
}

fn analytic_single(n: usize, p: &[f64]) -> f64 {
    (p[0] - 0.5).powi(2) + 1.0 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn junit_lists_failures_with_seeds() {
        let cases = vec![
            CheckCase {
                suite: "a",
                name: "ok",
                passed: true,
                detail: "fine".into(),
                failing_seeds: vec![],
                secs: 0.0,
            },
            CheckCase {
                suite: "a",
                name: "bad",
                passed: false,
                detail: "x < y".into(),
                failing_seeds: vec![3, 9],
                secs: 0.0,
            },
        ];
        let xml = junit_xml(&cases);
        assert!(xml.contains(r#"tests="2" failures="1""#));
        assert!(xml.contains("x &lt; y"));
        assert!(xml.contains("seeds: [3, 9]"));
    }

    #[test]
    fn all_expands_in_fixed_order() {
        let names: Vec<_> = Suite::All.expand().iter().map(|s| s.name()).collect();
        assert_eq!(names, ["ns", "reduction", "grad", "mup", "drift", "fit", "frontier", "ledger"]);
    }

    #[test]
    fn oracle_agrees_on_small_cases() {
        let pts = [(1.0, 3.0), (2.0, 2.0), (2.0, 2.0), (3.0, 3.0), (0.5, 5.0)];
        assert_eq!(brute_force_frontier(&pts), vec![4, 0, 1]);
        assert_eq!(pareto_indices(&pts), vec![4, 0, 1]);
    }
}
