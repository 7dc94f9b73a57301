//! Closed-form map solves on paired code rows.

use nalgebra::DMatrix;

use super::{LatentMap, MapMode};
use crate::error::{Error, Result};

fn check_pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.nrows() == 0 {
        return Err(Error::EmptyPairing);
    }
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows() * a.ncols(),
            found: b.nrows() * b.ncols(),
        });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("procrustes input"));
    }
    Ok(())
}

/// Orthogonal `Q` minimising `||A Q - B||_F`: `Q = U Vᵀ` from the SVD
/// `AᵀB = U S Vᵀ`.
pub fn procrustes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<LatentMap> {
    check_pair(a, b)?;
    let m = a.tr_mul(b);
    let svd = m.svd(true, true);
    let u = svd.u.ok_or(Error::NonFinite("procrustes SVD"))?;
    let v_t = svd.v_t.ok_or(Error::NonFinite("procrustes SVD"))?;
    Ok(LatentMap::single(u * v_t, MapMode::Orthogonal, a.nrows()))
}

/// Unrestricted `Q = argmin ||A Q - B||_F² + ridge ||Q||_F²`.
///
/// Solved by QR of the stacked system `[A; sqrt(ridge) I]`, which avoids
/// squaring the condition number of `A`.
pub fn least_squares_map(a: &DMatrix<f64>, b: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    check_pair(a, b)?;
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(Error::NonFinite("ridge"));
    }
    let (k, r) = a.shape();
    let (lhs, rhs) = if ridge > 0.0 {
        let s = libm::sqrt(ridge);
        let mut lhs = DMatrix::zeros(k + r, r);
        lhs.rows_mut(0, k).copy_from(a);
        for i in 0..r {
            lhs[(k + i, i)] = s;
        }
        let mut rhs = DMatrix::zeros(k + r, r);
        rhs.rows_mut(0, k).copy_from(b);
        (lhs, rhs)
    } else {
        if k < r {
            return Err(Error::RankDeficient);
        }
        (a.clone(), b.clone())
    };
    let qr = lhs.qr();
    let rmat = qr.r();
    let scale = rmat.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || rmat.diagonal().iter().any(|v| v.abs() <= scale * 1e-12) {
        return Err(Error::RankDeficient);
    }
    let qtb = qr.q().tr_mul(&rhs);
    rmat.solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_when_b_equals_a() {
        let a = DMatrix::from_fn(20, 4, |i, j| libm::sin((3 * i + 7 * j * j + i * j) as f64));
        let q = procrustes(&a, &a).unwrap().q;
        assert!((q - DMatrix::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn non_finite_rejected() {
        let mut a = DMatrix::from_element(3, 2, 1.0);
        a[(1, 1)] = f64::NAN;
        assert!(matches!(procrustes(&a, &a), Err(Error::NonFinite(_))));
    }

    #[test]
    fn rank_deficient_without_ridge() {
        // Second column duplicates the first.
        let a = DMatrix::from_fn(10, 2, |i, _| i as f64);
        assert_eq!(least_squares_map(&a, &a, 0.0), Err(Error::RankDeficient));
        assert!(least_squares_map(&a, &a, 1e-3).is_ok());
    }
}
