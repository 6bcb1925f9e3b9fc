//! Reference oracles for the acceptance suite. Each one is written from the
//! textbook definition and shares no code with the implementations it checks.

use muonbench_core::matops::Matrix;
use muonbench_core::model::{Batch, MlpParams, MlpSpec};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns the
/// eigenvalues and the eigenvectors as columns of `q`.
pub fn sym_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let scale: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                if a[p][r] == 0.0 {
                    continue;
                }
                let theta = (a[r][r] - a[p][p]) / (2.0 * a[p][r]);
                let t = if theta == 0.0 { 1.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (x, y) = (row[p], row[r]);
                    row[p] = c * x - s * y;
                    row[r] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (a[p][k], a[r][k]);
                    a[p][k] = c * x - s * y;
                    a[r][k] = s * x + c * y;
                }
                for row in q.iter_mut() {
                    let (x, y) = (row[p], row[r]);
                    row[p] = c * x - s * y;
                    row[r] = s * x + c * y;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), q)
}

/// Gram matrix on the smaller side; `true` when it is `AᵀA`.
fn gram(a: &Matrix) -> (Vec<Vec<f64>>, bool) {
    let tall = a.rows() >= a.cols();
    let k = a.rows().min(a.cols());
    let g = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if tall {
                        (0..a.rows()).map(|r| a[(r, i)] * a[(r, j)]).sum()
                    } else {
                        (0..a.cols()).map(|c| a[(i, c)] * a[(j, c)]).sum()
                    }
                })
                .collect()
        })
        .collect();
    (g, tall)
}

/// Singular values, descending.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let (mut ev, _) = sym_eigen(&gram(a).0);
    ev.sort_by(|x, y| y.total_cmp(x));
    ev.iter().map(|l| l.max(0.0).sqrt()).collect()
}

/// Polar factor `UVᵀ` of a full-rank matrix: `A(AᵀA)^{-1/2}` or `(AAᵀ)^{-1/2}A`.
pub fn polar(a: &Matrix) -> Matrix {
    let (g, tall) = gram(a);
    let (ev, q) = sym_eigen(&g);
    let k = ev.len();
    let inv_sqrt = Matrix::from_fn(k, k, |i, j| (0..k).map(|l| q[i][l] * q[j][l] / ev[l].sqrt()).sum());
    if tall {
        a.matmul(&inv_sqrt)
    } else {
        inv_sqrt.matmul(a)
    }
}

/// `O(n²)` dominance filter over `(compute, time)`: finite points that no
/// other finite point beats on one axis while matching or beating it on the
/// other; among exact duplicates the first index wins. Ordered by compute.
pub fn pareto(points: &[(f64, f64)]) -> Vec<usize> {
    let finite = |p: &(f64, f64)| p.0.is_finite() && p.1.is_finite();
    let mut out: Vec<usize> = (0..points.len())
        .filter(|&i| finite(&points[i]))
        .filter(|&i| {
            let p = points[i];
            !points
                .iter()
                .any(|q| finite(q) && q.0 <= p.0 && q.1 <= p.1 && (q.0 < p.0 || q.1 < p.1))
        })
        .filter(|&i| !(0..i).any(|j| points[j] == points[i]))
        .collect();
    out.sort_by(|&i, &j| points[i].0.total_cmp(&points[j].0));
    out
}

/// Mean squared error of the MLP, one sample and one neuron at a time.
pub fn mlp_loss(spec: &MlpSpec, params: &MlpParams, batch: &Batch) -> f64 {
    let mut total = 0.0;
    for i in 0..batch.x.rows() {
        let mut h: Vec<f64> = (0..spec.input_dim).map(|j| batch.x[(i, j)]).collect();
        for (l, w) in params.layers.iter().enumerate() {
            let a = spec.scaling(l).multiplier;
            let z: Vec<f64> = (0..w.rows())
                .map(|r| a * (0..w.cols()).map(|c| w[(r, c)] * h[c]).sum::<f64>())
                .collect();
            h = if l + 1 == params.layers.len() { z } else { z.into_iter().map(f64::tanh).collect() };
        }
        total += h.iter().enumerate().map(|(k, v)| (v - batch.y[(i, k)]).powi(2)).sum::<f64>();
    }
    total / (batch.x.rows() * spec.output_dim) as f64
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
