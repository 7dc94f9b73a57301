//! Blocked brute-force nearest neighbours via `|a|² + |b|² - 2 a·b`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{Correspondence, LatentMap};
use crate::error::{Error, Result};

const BLOCK: usize = 256;

/// Row and column minima of the squared distance matrix between `queries`
/// (rows) and `targets` (rows). Ties resolve to the lowest index.
pub(crate) struct Scan {
    pub row_best: Vec<usize>,
    pub row_dist: Vec<f64>,
    pub col_best: Vec<usize>,
    pub col_dist: Vec<f64>,
}

struct BlockScan {
    start: usize,
    row_best: Vec<usize>,
    row_dist: Vec<f64>,
    col_best: Vec<usize>,
    col_dist: Vec<f64>,
}

fn scan_block(
    queries: &DMatrix<f64>,
    targets_t: &DMatrix<f64>,
    qn: &[f64],
    tn: &[f64],
    start: usize,
) -> BlockScan {
    let len = BLOCK.min(queries.nrows() - start);
    let m = targets_t.ncols();
    let dots = queries.rows(start, len) * targets_t;
    let mut out = BlockScan {
        start,
        row_best: alloc::vec![0; len],
        row_dist: alloc::vec![f64::INFINITY; len],
        col_best: alloc::vec![usize::MAX; m],
        col_dist: alloc::vec![f64::INFINITY; m],
    };
    for j in 0..m {
        for i in 0..len {
            let d = (qn[start + i] + tn[j] - 2.0 * dots[(i, j)]).max(0.0);
            if d < out.row_dist[i] {
                out.row_dist[i] = d;
                out.row_best[i] = j;
            }
            if d < out.col_dist[j] {
                out.col_dist[j] = d;
                out.col_best[j] = start + i;
            }
        }
    }
    out
}

pub(crate) fn scan(queries: &DMatrix<f64>, targets: &DMatrix<f64>) -> Scan {
    let n = queries.nrows();
    let m = targets.nrows();
    let qn: Vec<f64> = queries.row_iter().map(|r| r.norm_squared()).collect();
    let tn: Vec<f64> = targets.row_iter().map(|r| r.norm_squared()).collect();
    let targets_t = targets.transpose();
    let starts: Vec<usize> = (0..n).step_by(BLOCK).collect();

    #[cfg(feature = "parallel")]
    let blocks: Vec<BlockScan> = {
        use rayon::prelude::*;
        starts
            .par_iter()
            .map(|&s| scan_block(queries, &targets_t, &qn, &tn, s))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let blocks: Vec<BlockScan> = starts
        .iter()
        .map(|&s| scan_block(queries, &targets_t, &qn, &tn, s))
        .collect();

    let mut out = Scan {
        row_best: Vec::with_capacity(n),
        row_dist: Vec::with_capacity(n),
        col_best: alloc::vec![usize::MAX; m],
        col_dist: alloc::vec![f64::INFINITY; m],
    };
    // Blocks are merged in ascending order so strict comparison keeps the lowest index.
    for b in blocks {
        debug_assert_eq!(b.start, out.row_best.len());
        out.row_best.extend_from_slice(&b.row_best);
        out.row_dist.extend_from_slice(&b.row_dist);
        for j in 0..m {
            if b.col_dist[j] < out.col_dist[j] {
                out.col_dist[j] = b.col_dist[j];
                out.col_best[j] = b.col_best[j];
            }
        }
    }
    out
}

/// Index of the Euclidean-nearest target row for every query row.
pub fn nearest_neighbors(queries: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<Vec<usize>> {
    if targets.nrows() == 0 {
        return Err(Error::EmptyTargets);
    }
    if queries.ncols() != targets.ncols() {
        return Err(Error::DimensionMismatch {
            expected: targets.ncols(),
            found: queries.ncols(),
        });
    }
    Ok(scan(queries, targets).row_best)
}

/// Mutual nearest neighbours between `za Q` and `zb`.
///
/// `(i, j)` is kept iff `j` is the nearest B code to `z_i^A Q` and `i` is the
/// A index whose mapped code `z_i^A Q` is nearest to `z_j^B`.
pub fn best_buddies(
    za: &DMatrix<f64>,
    zb: &DMatrix<f64>,
    map: &LatentMap,
) -> Result<Correspondence> {
    best_buddies_weighted(za, zb, map, None).map(|(c, _)| c)
}

/// [`best_buddies`] under a diagonally weighted metric; also returns the mean
/// matched distance. `weights` scales each latent coordinate before distances
/// are taken.
pub fn best_buddies_weighted(
    za: &DMatrix<f64>,
    zb: &DMatrix<f64>,
    map: &LatentMap,
    weights: Option<&DVector<f64>>,
) -> Result<(Correspondence, f64)> {
    let mut mapped = map.apply(za)?;
    if zb.ncols() != map.rank() {
        return Err(Error::DimensionMismatch {
            expected: map.rank(),
            found: zb.ncols(),
        });
    }
    if za.nrows() == 0 || zb.nrows() == 0 {
        return Ok((Correspondence::default(), 0.0));
    }
    let mut zb = zb.clone();
    if let Some(w) = weights {
        for (k, &wk) in w.iter().enumerate() {
            mapped.column_mut(k).scale_mut(wk);
            zb.column_mut(k).scale_mut(wk);
        }
    }
    let s = scan(&mapped, &zb);
    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (i, &j) in s.row_best.iter().enumerate() {
        if s.col_best[j] == i {
            pairs.push((i, j));
            total += libm::sqrt(s.row_dist[i]);
        }
    }
    let mean = if pairs.is_empty() {
        0.0
    } else {
        total / pairs.len() as f64
    };
    Ok((Correspondence { pairs }, mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn one_dimensional_inspection() {
        let a = DMatrix::from_column_slice(2, 1, &[0.0, 10.0]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 9.0]);
        assert_eq!(nearest_neighbors(&a, &b).unwrap(), vec![0, 1]);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let q = DMatrix::from_column_slice(1, 1, &[0.0]);
        let t = DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 1.0]);
        assert_eq!(nearest_neighbors(&q, &t).unwrap(), vec![0]);
        let dup = DMatrix::from_column_slice(3, 1, &[5.0, 5.0, 2.0]);
        assert_eq!(nearest_neighbors(&dup, &dup).unwrap(), vec![0, 0, 2]);
    }

    #[test]
    fn empty_targets_error() {
        let q = DMatrix::zeros(2, 3);
        let t = DMatrix::zeros(0, 3);
        assert_eq!(nearest_neighbors(&q, &t), Err(Error::EmptyTargets));
    }

    #[test]
    fn buddies_single_far_point() {
        let a = DMatrix::from_column_slice(2, 1, &[0.0, 0.1]);
        let b = DMatrix::from_column_slice(1, 1, &[100.0]);
        let c = best_buddies(&a, &b, &LatentMap::identity(1)).unwrap();
        // Both A points pick B's only point; from B, 0.1 is nearer than 0.
        assert_eq!(c.pairs(), &[(1, 0)]);
    }

    #[test]
    fn buddies_identity() {
        let z = DMatrix::from_fn(40, 3, |i, j| {
            ((i * 13 + j * 7) % 17) as f64 + 0.01 * i as f64
        });
        let c = best_buddies(&z, &z, &LatentMap::identity(3)).unwrap();
        assert_eq!(c, Correspondence::identity(40));
    }

    #[test]
    fn blocks_merge_like_a_single_pass() {
        let n = 3 * BLOCK + 17;
        let q = DMatrix::from_fn(n, 2, |i, j| libm::sin((i * 31 + j * 17) as f64));
        let t = DMatrix::from_fn(90, 2, |i, j| libm::cos((i * 11 + j * 5) as f64));
        let s = scan(&q, &t);
        for j in 0..t.nrows() {
            let mut best = (f64::INFINITY, 0);
            for i in 0..n {
                let d = (q.row(i) - t.row(j)).norm_squared();
                if d < best.0 - 1e-12 {
                    best = (d, i);
                }
            }
            assert_eq!(s.col_best[j], best.1);
        }
    }
}
