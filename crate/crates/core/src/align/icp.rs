use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::nn::best_buddies_weighted;
use super::procrustes::{least_squares_map, procrustes};
use super::{Correspondence, LatentMap, MapMode};
use crate::error::{Error, Result};
use crate::pca::LatentSet;

/// Knobs of the ICP loop and of the per-iteration map solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    pub max_iters: usize,
    /// Stop once `||Q_t - Q_{t-1}||_F < tol`.
    pub tol: f64,
    /// Abort when an iteration accepts fewer pairs. `None` means `max(r / 10, 3)`.
    pub min_buddies: Option<usize>,
    /// Scale latent coordinate `k` by `1 / sqrt(var_k)` of domain B when matching.
    pub whiten: bool,
    pub mode: MapMode,
    /// Ridge weight for the unrestricted solve; ignored in orthogonal mode.
    pub ridge: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-5,
            min_buddies: None,
            whiten: false,
            mode: MapMode::Orthogonal,
            ridge: 0.0,
        }
    }
}

impl IcpConfig {
    pub fn required_buddies(&self, rank: usize) -> usize {
        self.min_buddies.unwrap_or((rank / 10).max(3)).max(1)
    }
}

fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, mode: MapMode, ridge: f64) -> Result<DMatrix<f64>> {
    match mode {
        MapMode::Orthogonal => Ok(procrustes(a, b)?.q),
        MapMode::UnrestrictedLinear => least_squares_map(a, b, ridge),
    }
}

fn check_ranks(za: &LatentSet, zb: &LatentSet) -> Result<()> {
    if za.rank() != zb.rank() {
        return Err(Error::DimensionMismatch {
            expected: za.rank(),
            found: zb.rank(),
        });
    }
    Ok(())
}

fn whitening_weights(zb: &DMatrix<f64>) -> DVector<f64> {
    let n = zb.nrows() as f64;
    DVector::from_iterator(
        zb.ncols(),
        zb.column_iter().map(|c| {
            let m = c.sum() / n;
            let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            if var > 0.0 {
                1.0 / libm::sqrt(var)
            } else {
                1.0
            }
        }),
    )
}

/// Unpaired fit: alternate best-buddy matching and a map solve from `Q = I`.
///
/// The loop is deterministic; it stops when the update falls below
/// `config.tol` or after `config.max_iters` iterations, reporting which in
/// [`LatentMap::converged`].
pub fn fit_icp(za: &LatentSet, zb: &LatentSet, config: &IcpConfig) -> Result<LatentMap> {
    check_ranks(za, zb)?;
    if !za.skew_aligned || !zb.skew_aligned {
        log::warn!("fitting ICP on codes from bases without skew alignment; signs may disagree");
    }
    let r = za.rank();
    let required = config.required_buddies(r);
    let weights = config.whiten.then(|| whitening_weights(&zb.codes));
    let mut map = LatentMap::identity(r);
    map.mode = config.mode;
    map.converged = false;

    for iteration in 1..=config.max_iters {
        let (pairs, mean_distance) =
            best_buddies_weighted(&za.codes, &zb.codes, &map, weights.as_ref())?;
        if pairs.len() < required {
            log::error!(
                "iteration {iteration}: {} best buddies, need {required}; aborting",
                pairs.len()
            );
            return Err(Error::TooFewBuddies {
                iteration,
                found: pairs.len(),
                required,
            });
        }
        let (a, b) = pairs.gather(&za.codes, &zb.codes);
        let q = solve(&a, &b, config.mode, config.ridge)?;
        let delta = (&q - &map.q).norm();
        log::info!(
            "iteration {iteration}: buddies={} delta={delta:.3e} mean_distance={mean_distance:.4e}",
            pairs.len()
        );
        map.q = q;
        map.iterations_run = iteration;
        map.buddy_counts.push(pairs.len());
        map.deltas.push(delta);
        if delta < config.tol {
            map.converged = true;
            break;
        }
    }
    if !map.converged {
        log::warn!(
            "ICP stopped after {} iterations without converging",
            map.iterations_run
        );
    }
    Ok(map)
}

/// Supervised fit on known pairs: a single solve, no correspondence search.
pub fn fit_paired(
    za: &LatentSet,
    zb: &LatentSet,
    pairing: &Correspondence,
    mode: MapMode,
    ridge: f64,
) -> Result<LatentMap> {
    check_ranks(za, zb)?;
    if pairing.is_empty() {
        return Err(Error::EmptyPairing);
    }
    if let Some(&(a, b)) = pairing
        .pairs()
        .iter()
        .find(|&&(a, b)| a >= za.len() || b >= zb.len())
    {
        return Err(Error::InvalidPair { a, b });
    }
    let (a, b) = pairing.gather(&za.codes, &zb.codes);
    let q = solve(&a, &b, mode, ridge)?;
    Ok(LatentMap::single(q, mode, pairing.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn latent(codes: DMatrix<f64>) -> LatentSet {
        let ids = (0..codes.nrows()).map(|i| i.to_string()).collect();
        LatentSet {
            codes,
            ids,
            basis_id: 0,
            skew_aligned: true,
        }
    }

    #[test]
    fn same_set_converges_in_one_iteration() {
        let z = latent(DMatrix::from_fn(50, 4, |i, j| {
            libm::sin((i * 7 + j * j * 3 + i * j) as f64 * 0.37)
        }));
        let map = fit_icp(&z, &z, &IcpConfig::default()).unwrap();
        assert_eq!(map.iterations_run, 1);
        assert!(map.converged);
        assert!((map.q - DMatrix::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn rank_mismatch() {
        let a = latent(DMatrix::zeros(5, 3));
        let b = latent(DMatrix::zeros(5, 2));
        assert!(matches!(
            fit_icp(&a, &b, &IcpConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn too_few_buddies_aborts() {
        // Every A point is nearest to the same B point: a single mutual pair.
        let a = latent(DMatrix::from_fn(10, 2, |i, _| i as f64));
        let b = latent(DMatrix::from_fn(10, 2, |i, _| -100.0 - i as f64));
        let err = fit_icp(&a, &b, &IcpConfig::default()).unwrap_err();
        assert_eq!(
            err,
            Error::TooFewBuddies {
                iteration: 1,
                found: 1,
                required: 3
            }
        );
    }

    #[test]
    fn paired_requires_pairs() {
        let z = latent(DMatrix::from_element(3, 2, 1.0));
        assert_eq!(
            fit_paired(&z, &z, &Correspondence::default(), MapMode::Orthogonal, 0.0),
            Err(Error::EmptyPairing)
        );
    }
}
