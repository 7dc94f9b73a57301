//! Learning the `r x r` latent map `Q` between two PCA code sets.
//!
//! Codes are rows and a code of domain A is carried to domain B as `z_A Q`.
//! Without pairing, [`fit_icp`] alternates mutual-nearest-neighbour matching
//! ("best buddies") with an orthogonal Procrustes solve, starting from
//! `Q = I`. With known pairs, [`fit_paired`] solves once, either
//! orthogonally or as an unrestricted (optionally ridge-regularised) linear map.

mod icp;
mod nn;
mod procrustes;

use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub use icp::{fit_icp, fit_paired, IcpConfig};
pub use nn::{best_buddies, best_buddies_weighted, nearest_neighbors};
pub use procrustes::{least_squares_map, procrustes};

/// Bound on `||QᵀQ - I||_F` for orthogonal maps.
pub const ORTHOGONAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapMode {
    #[default]
    Orthogonal,
    UnrestrictedLinear,
}

/// A fitted latent map together with a record of how it was fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMap {
    pub q: DMatrix<f64>,
    pub mode: MapMode,
    pub iterations_run: usize,
    /// Accepted pairs per iteration.
    pub buddy_counts: Vec<usize>,
    /// `||Q_t - Q_{t-1}||_F` per iteration.
    pub deltas: Vec<f64>,
    pub converged: bool,
}

impl LatentMap {
    pub fn identity(r: usize) -> Self {
        Self {
            q: DMatrix::identity(r, r),
            mode: MapMode::Orthogonal,
            iterations_run: 0,
            buddy_counts: Vec::new(),
            deltas: Vec::new(),
            converged: true,
        }
    }

    pub fn rank(&self) -> usize {
        self.q.nrows()
    }

    /// Maps A-domain codes (rows) to B-domain codes: `Z Q`.
    pub fn apply(&self, codes: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if codes.ncols() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.rank(),
                found: codes.ncols(),
            });
        }
        Ok(codes * &self.q)
    }

    pub fn orthogonality_error(&self) -> f64 {
        linalg::orthogonality_error(&self.q)
    }

    /// Checks shape, finiteness and, for orthogonal maps, `||QᵀQ - I||_F <= tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if !self.q.is_square() || self.q.nrows() == 0 {
            return Err(Error::Invariant(
                "latent map must be a nonempty square matrix".into(),
            ));
        }
        if self.q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent map"));
        }
        if self.mode == MapMode::Orthogonal {
            let err = self.orthogonality_error();
            if err > tol {
                return Err(Error::NotOrthogonal(err));
            }
        }
        Ok(())
    }

    fn single(q: DMatrix<f64>, mode: MapMode, pairs: usize) -> Self {
        Self {
            q,
            mode,
            iterations_run: 1,
            buddy_counts: alloc::vec![pairs],
            deltas: Vec::new(),
            converged: true,
        }
    }
}

/// One-to-one index pairs `(row in A, row in B)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Correspondence {
    pairs: Vec<(usize, usize)>,
}

impl Correspondence {
    /// Validates that indices are below `n_a` / `n_b` and never repeat on either side.
    pub fn new(pairs: Vec<(usize, usize)>, n_a: usize, n_b: usize) -> Result<Self> {
        let mut seen_a = alloc::vec![false; n_a];
        let mut seen_b = alloc::vec![false; n_b];
        for &(a, b) in &pairs {
            if a >= n_a || b >= n_b || seen_a[a] || seen_b[b] {
                return Err(Error::InvalidPair { a, b });
            }
            seen_a[a] = true;
            seen_b[b] = true;
        }
        Ok(Self { pairs })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            pairs: (0..n).map(|i| (i, i)).collect(),
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The same pairs with the roles of A and B exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(a, b)| (b, a)).collect(),
        }
    }

    /// Stacks the paired rows of `za` and `zb` into two `k x r` matrices.
    pub fn gather(&self, za: &DMatrix<f64>, zb: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let ia: Vec<usize> = self.pairs.iter().map(|p| p.0).collect();
        let ib: Vec<usize> = self.pairs.iter().map(|p| p.1).collect();
        (za.select_rows(&ia), zb.select_rows(&ib))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn correspondence_rejects_duplicates() {
        assert!(Correspondence::new(vec![(0, 1), (1, 1)], 2, 2).is_err());
        assert!(Correspondence::new(vec![(0, 0), (0, 1)], 2, 2).is_err());
        assert!(Correspondence::new(vec![(2, 0)], 2, 2).is_err());
        assert_eq!(
            Correspondence::new(vec![(1, 0), (0, 1)], 2, 2)
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn map_validation() {
        let mut m = LatentMap::identity(3);
        assert!(m.validate(ORTHOGONAL_TOL).is_ok());
        m.q[(0, 1)] = 0.1;
        assert!(matches!(
            m.validate(ORTHOGONAL_TOL),
            Err(Error::NotOrthogonal(_))
        ));
        m.mode = MapMode::UnrestrictedLinear;
        assert!(m.validate(ORTHOGONAL_TOL).is_ok());
    }
}
