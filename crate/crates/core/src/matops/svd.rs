use super::Matrix;
use crate::error::Result;

/// Off-diagonal Gram threshold at which a column pair counts as orthogonal.
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 60;

/// Thin singular value decomposition `A = U · diag(s) · Vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `m × k` with orthonormal columns.
    pub u: Matrix,
    /// `k` singular values, descending.
    pub s: Vec<f64>,
    /// `n × k` with orthonormal columns.
    pub v: Matrix,
}

impl SvdResult {
    /// `U · diag(s) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let us = Matrix::from_fn(self.u.rows(), self.s.len(), |r, c| self.u[(r, c)] * self.s[c]);
        us.matmul_nt(&self.v)
    }

    /// The orthogonal polar factor `U · Vᵀ`.
    pub fn polar(&self) -> Matrix {
        self.u.matmul_nt(&self.v)
    }
}

/// One-sided (Hestenes) Jacobi SVD with cyclic sweeps.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    a.check_finite("svd input")?;
    if a.rows() < a.cols() {
        let t = svd_tall(&a.transpose());
        return Ok(SvdResult {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    Ok(svd_tall(a))
}

/// `(min σ, max σ)` from the Jacobi SVD.
pub fn singular_value_range(a: &Matrix) -> Result<(f64, f64)> {
    let s = svd(a)?.s;
    Ok((*s.last().unwrap(), s[0]))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

/// Requires `rows >= cols`.
fn svd_tall(a: &Matrix) -> SvdResult {
    let (m, n) = a.shape();
    // Columns of A and of V stored contiguously.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut max_off: f64 = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                let off = gamma.abs() / (alpha * beta).sqrt();
                max_off = max_off.max(off);
                if off <= JACOBI_TOL {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                rotate(&mut left[p], &mut right[0], c, s);
                let (left, right) = vcols.split_at_mut(q);
                rotate(&mut left[p], &mut right[0], c, s);
            }
        }
        if max_off <= JACOBI_TOL {
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (j, dot(c, c).sqrt()))
        .collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

    let smax = order[0].1;
    let cutoff = smax * (m as f64) * f64::EPSILON;
    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut v = Matrix::zeros(n, n);
    for (k, &(j, sigma)) in order.iter().enumerate() {
        let candidate = if sigma > cutoff && sigma > 0.0 {
            Some(cols[j].iter().map(|x| x / sigma).collect::<Vec<_>>())
        } else {
            None
        };
        ucols.push(orthonormal_against(candidate, &ucols, m));
        s.push(sigma);
        for i in 0..n {
            v[(i, k)] = vcols[j][i];
        }
    }
    let u = Matrix::from_fn(m, n, |i, k| ucols[k][i]);
    SvdResult { u, s, v }
}

/// Re-orthonormalizes `candidate` against `basis` (modified Gram-Schmidt); if
/// no usable candidate is given, completes the basis with a unit vector.
fn orthonormal_against(candidate: Option<Vec<f64>>, basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    let project = |mut x: Vec<f64>| {
        for _ in 0..2 {
            for b in basis {
                let d = dot(&x, b);
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= d * bi);
            }
        }
        let norm = dot(&x, &x).sqrt();
        (x, norm)
    };
    if let Some(c) = candidate {
        let (x, norm) = project(c);
        if norm > 0.5 {
            return x.into_iter().map(|v| v / norm).collect();
        }
    }
    for e in 0..m {
        let mut unit = vec![0.0; m];
        unit[e] = 1.0;
        let (x, norm) = project(unit);
        if norm > 0.5 {
            return x.into_iter().map(|v| v / norm).collect();
        }
    }
    unreachable!("basis of dimension < m always admits a completing unit vector")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_has_unit_singular_values() {
        let r = svd(&Matrix::identity(3)).unwrap();
        assert_eq!(r.s, vec![1.0, 1.0, 1.0]);
        assert!(r.polar().sub(&Matrix::identity(3)).max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_values_sorted() {
        let r = svd(&Matrix::diag(2, 2, &[2.0, 3.0])).unwrap();
        assert_eq!(r.s, vec![3.0, 2.0]);
        assert_eq!(singular_value_range(&Matrix::diag(2, 2, &[3.0, 2.0])).unwrap(), (2.0, 3.0));
        assert_eq!(singular_value_range(&Matrix::identity(3)).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn rank_deficient_and_zero_inputs_keep_orthonormal_factors() {
        let zero = svd(&Matrix::zeros(3, 5)).unwrap();
        assert!(zero.s.iter().all(|&s| s == 0.0));
        let utu = zero.u.matmul_tn(&zero.u);
        assert!(utu.sub(&Matrix::identity(3)).max_abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let col = Matrix::random_normal(6, 1, 1.0, &mut rng);
        let row = Matrix::random_normal(1, 4, 1.0, &mut rng);
        let rank1 = col.matmul(&row);
        let r = svd(&rank1).unwrap();
        assert!(r.s[1] < 1e-12 * r.s[0]);
        assert!(r.u.matmul_tn(&r.u).sub(&Matrix::identity(4)).max_abs() < 1e-10);
        assert!(r.reconstruct().sub(&rank1).max_abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::INFINITY;
        assert!(svd(&m).is_err());
    }
}
