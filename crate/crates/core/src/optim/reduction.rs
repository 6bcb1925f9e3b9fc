//! Point-estimate Shampoo and Soap transforms.
//!
//! With the second moments replaced by the current gradient's own Gram
//! matrices, both preconditioners collapse to the polar factor `U·Vᵀ`, the
//! exact target that Muon's Newton-Schulz iteration approximates.

use crate::error::{Error, Result};
use crate::matops::{svd, Matrix, SvdResult};

/// Relative singular value floor below which a gradient counts as rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Entries of the rotated gradient below this fraction of its largest entry
/// are rounding noise of an exactly diagonal matrix.
const ROTATION_NOISE: f64 = 1e-12;

/// Adam epsilon for the rotated-basis step.
const SOAP_EPS: f64 = 1e-30;

fn full_rank_svd(g: &Matrix) -> Result<SvdResult> {
    let r = svd(g)?;
    let max = r.s[0];
    if let Some((index, &value)) = r.s.iter().enumerate().find(|(_, &s)| !(s > RANK_TOL * max)) {
        return Err(Error::RankDeficient { index, value, max });
    }
    Ok(r)
}

/// `U · diag(f(σ)) · Uᵀ` for orthonormal columns `U`.
fn spectral_function(u: &Matrix, s: &[f64], f: impl Fn(f64) -> f64) -> Matrix {
    let scaled = Matrix::from_fn(u.rows(), u.cols(), |r, c| u[(r, c)] * f(s[c]));
    scaled.matmul_nt(u)
}

/// `(G·Gᵀ)^{-1/4} · G · (Gᵀ·G)^{-1/4}`, with the inverse roots formed from the
/// eigen-structure of the Gram matrices (pseudo-inverse on the null space).
pub fn shampoo_point_update(g: &Matrix) -> Result<Matrix> {
    let r = full_rank_svd(g)?;
    // Eigenvalues of both Gram matrices are σ², so λ^{-1/4} = σ^{-1/2}.
    let left = spectral_function(&r.u, &r.s, |s| (s * s).powf(-0.25));
    let right = spectral_function(&r.v, &r.s, |s| (s * s).powf(-0.25));
    Ok(left.matmul(g).matmul(&right))
}

/// Adam in the eigenbasis of the gradient's Gram matrices, with every moment
/// replaced by its point estimate.
pub fn soap_point_update(g: &Matrix) -> Result<Matrix> {
    if g.rows() > g.cols() {
        return Ok(soap_point_update(&g.transpose())?.transpose());
    }
    let r = full_rank_svd(g)?;
    let (q_left, q_right) = (&r.u, &r.v);

    let rotated = q_left.matmul_tn(g).matmul(q_right);
    let floor = ROTATION_NOISE * rotated.max_abs();
    let rotated = rotated.map(|x| if x.abs() <= floor { 0.0 } else { x });

    let first = rotated.clone();
    let second = rotated.hadamard(&rotated);
    let step = first.zip_map(&second, |m, v| m / (v.sqrt() + SOAP_EPS));
    Ok(q_left.matmul(&step).matmul_nt(q_right))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_fixed() {
        let i = Matrix::identity(3);
        assert!(shampoo_point_update(&i).unwrap().sub(&i).max_abs() < 1e-15);
        assert!(soap_point_update(&i).unwrap().sub(&i).max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_inputs_flatten() {
        let d = Matrix::diag(2, 2, &[4.0, 1.0]);
        assert!(shampoo_point_update(&d).unwrap().sub(&Matrix::identity(2)).max_abs() < 1e-15);
        let d = Matrix::diag(2, 2, &[9.0, 4.0]);
        assert!(soap_point_update(&d).unwrap().sub(&Matrix::identity(2)).max_abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let d = Matrix::diag(3, 3, &[1.0, 1.0, 0.0]);
        match shampoo_point_update(&d) {
            Err(Error::RankDeficient { index, value, .. }) => {
                assert_eq!(index, 2);
                assert_eq!(value, 0.0);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        assert!(soap_point_update(&d).is_err());
    }

    #[test]
    fn tall_inputs_transpose() {
        let g = Matrix::from_fn(4, 2, |r, c| if r == c { 2.0 + r as f64 } else { 0.1 * (r + c) as f64 });
        let a = shampoo_point_update(&g).unwrap();
        let b = soap_point_update(&g).unwrap();
        assert_eq!(a.shape(), (4, 2));
        assert!(a.sub(&b).max_abs() < 1e-12);
    }
}
