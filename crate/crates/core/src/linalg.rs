//! Small dense helpers shared by the PCA and alignment code.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

/// `||MᵀM - I||_F`, the deviation of `m`'s columns from orthonormality.
pub fn orthogonality_error(m: &DMatrix<f64>) -> f64 {
    let mut gram = m.tr_mul(m);
    for i in 0..gram.nrows() {
        gram[(i, i)] -= 1.0;
    }
    gram.norm()
}

/// Tolerance on `||QᵀQ - I||_F` for an `r`-column matrix stored at single precision.
///
/// Rounding each entry to f32 perturbs every Gram entry by roughly one f32 ulp,
/// so the Frobenius error grows linearly in `r`.
pub fn single_precision_tolerance(r: usize) -> f64 {
    1e-6 + 4.0 * r as f64 * f32::EPSILON as f64
}

/// Rounds every entry through `f32`.
pub fn quantize_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v as f32 as f64)
}

pub fn quantize_vector(v: &DVector<f64>) -> DVector<f64> {
    v.map(|x| x as f32 as f64)
}

/// Eigendecomposition of a symmetric matrix with eigenpairs sorted by
/// decreasing eigenvalue (stable in the original index on ties).
pub fn symmetric_eigen_desc(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(&order);
    (values, vectors)
}

/// Flips `col` so that its largest-magnitude entry is positive (ties: lowest index).
pub fn canonicalize_sign(m: &mut DMatrix<f64>, col: usize) {
    let mut best = 0usize;
    let mut best_abs = -1.0f64;
    for (i, v) in m.column(col).iter().enumerate() {
        if v.abs() > best_abs {
            best_abs = v.abs();
            best = i;
        }
    }
    if m[(best, col)] < 0.0 {
        m.column_mut(col).neg_mut();
    }
}

/// Re-orthonormalises the columns of `m` in place with two passes of modified
/// Gram-Schmidt. Columns flagged in `replace`, or that collapse numerically,
/// are rebuilt from standard basis vectors in index order.
pub fn orthonormalize_columns(m: &mut DMatrix<f64>, replace: &[bool]) {
    let (d, r) = m.shape();
    let mut next_unit = 0usize;
    for k in 0..r {
        let mut needs_fill = replace.get(k).copied().unwrap_or(false);
        if !needs_fill {
            needs_fill = !orthogonalize_against(m, k);
        }
        while needs_fill && next_unit < d {
            m.column_mut(k).fill(0.0);
            m[(next_unit, k)] = 1.0;
            next_unit += 1;
            needs_fill = !orthogonalize_against(m, k);
        }
    }
}

/// Projects column `k` off columns `0..k` (twice) and normalises it. Returns
/// false when the remainder is numerically zero.
fn orthogonalize_against(m: &mut DMatrix<f64>, k: usize) -> bool {
    let original = m.column(k).norm();
    if original == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for j in 0..k {
            let dot = m.column(j).dot(&m.column(k));
            let cj = m.column(j).clone_owned();
            m.column_mut(k).axpy(-dot, &cj, 1.0);
        }
    }
    let norm = m.column(k).norm();
    if norm <= original * 1e-10 {
        return false;
    }
    m.column_mut(k).unscale_mut(norm);
    true
}
