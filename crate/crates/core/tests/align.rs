use lintra_core::align::{
    best_buddies, fit_icp, fit_paired, least_squares_map, nearest_neighbors, procrustes,
    Correspondence, IcpConfig, LatentMap, MapMode,
};
use lintra_core::dataset::permutation;
use lintra_core::linalg::orthogonality_error;
use lintra_core::pca::LatentSet;
use lintra_core::synth::{plane_rotation, random_orthogonal};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, r: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn latent(codes: DMatrix<f64>) -> LatentSet {
    let ids = (0..codes.nrows()).map(|i| format!("{i}")).collect();
    LatentSet {
        codes,
        ids,
        basis_id: 0,
        skew_aligned: true,
    }
}

fn brute_force_nn(q: &DMatrix<f64>, t: &DMatrix<f64>) -> Vec<usize> {
    (0..q.nrows())
        .map(|i| {
            let mut best = (f64::INFINITY, 0);
            for j in 0..t.nrows() {
                let d: f64 = (0..q.ncols())
                    .map(|k| (q[(i, k)] - t[(j, k)]).powi(2))
                    .sum();
                if d < best.0 {
                    best = (d, j);
                }
            }
            best.1
        })
        .collect()
}

#[test]
fn nearest_neighbors_match_brute_force() {
    let q = gaussian(500, 8, 1);
    let t = gaussian(500, 8, 2);
    assert_eq!(nearest_neighbors(&q, &t).unwrap(), brute_force_nn(&q, &t));
}

#[test]
fn procrustes_quarter_turn() {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let q = procrustes(&a, &b).unwrap().q;
    let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    assert!((q - expected).norm() < 1e-12);
}

#[test]
fn procrustes_recovers_random_rotation() {
    let a = gaussian(40, 6, 3);
    let r = random_orthogonal(6, 4);
    let q = procrustes(&a, &(&a * &r)).unwrap().q;
    assert!((q - r).norm() < 1e-8);
}

#[test]
fn icp_recovers_small_rotation_under_permutation() {
    let n = 300;
    let za = gaussian(n, 8, 5);
    let rot = plane_rotation(8, 5f64.to_radians(), 6);
    let rotated = &za * &rot;
    let perm = permutation(n, 7);
    let zb = DMatrix::from_fn(n, 8, |i, k| rotated[(perm[i], k)]);
    let map = fit_icp(&latent(za), &latent(zb), &IcpConfig::default()).unwrap();
    assert!(map.converged);
    assert!((map.q - rot).norm() < 1e-6);
}

#[test]
fn unrestricted_map_recovers_general_matrix() {
    let a = gaussian(80, 5, 8);
    let m = gaussian(5, 5, 9);
    let b = &a * &m;
    let fitted = least_squares_map(&a, &b, 0.0).unwrap();
    assert!((&fitted - &m).norm() < 1e-6);

    let pairs = Correspondence::identity(80);
    let lin = fit_paired(
        &latent(a.clone()),
        &latent(b.clone()),
        &pairs,
        MapMode::UnrestrictedLinear,
        0.0,
    )
    .unwrap();
    let orth = fit_paired(
        &latent(a.clone()),
        &latent(b.clone()),
        &pairs,
        MapMode::Orthogonal,
        0.0,
    )
    .unwrap();
    let res_lin = (&a * &lin.q - &b).norm();
    let res_orth = (&a * &orth.q - &b).norm();
    assert!(res_lin <= res_orth);
}

#[test]
fn ridge_shrinks_the_map() {
    let a = gaussian(30, 4, 10);
    let b = gaussian(30, 4, 11);
    let plain = least_squares_map(&a, &b, 0.0).unwrap();
    let ridged = least_squares_map(&a, &b, 10.0).unwrap();
    assert!(ridged.norm() < plain.norm());
}

#[test]
fn icp_min_buddies_override() {
    let za = gaussian(20, 4, 12);
    let config = IcpConfig {
        min_buddies: Some(21),
        ..IcpConfig::default()
    };
    assert!(fit_icp(&latent(za.clone()), &latent(za), &config).is_err());
}

#[test]
fn whitened_icp_still_recovers_rotation() {
    let mut za = gaussian(200, 6, 13);
    for (k, mut c) in za.column_iter_mut().enumerate() {
        c *= 1.0 / (k + 1) as f64;
    }
    let rot = plane_rotation(6, 2f64.to_radians(), 14);
    let zb = &za * &rot;
    let config = IcpConfig {
        whiten: true,
        ..IcpConfig::default()
    };
    let map = fit_icp(&latent(za), &latent(zb), &config).unwrap();
    assert!((map.q - rot).norm() < 1e-6);
}

fn sorted(mut p: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    p.sort_unstable();
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn best_buddies_are_symmetric(seed in any::<u64>(), na in 2usize..60, nb in 2usize..60, r in 1usize..6) {
        let za = gaussian(na, r, seed);
        let zb = gaussian(nb, r, seed.wrapping_add(1));
        let id = LatentMap::identity(r);
        let ab = best_buddies(&za, &zb, &id).unwrap();
        let ba = best_buddies(&zb, &za, &id).unwrap();
        prop_assert_eq!(sorted(ab.pairs().to_vec()), sorted(ba.transposed().pairs().to_vec()));
    }

    #[test]
    fn procrustes_beats_perturbations(seed in any::<u64>(), r in 2usize..8) {
        let a = gaussian(5 * r, r, seed);
        let b = gaussian(5 * r, r, seed.wrapping_add(1));
        let q = procrustes(&a, &b).unwrap().q;
        prop_assert!(orthogonality_error(&q) < 1e-10);
        let best = (&a * &q - &b).norm();
        for k in 0..50u64 {
            let nudge = plane_rotation(r, 0.01 + 0.02 * k as f64, seed ^ k);
            let other = (&a * (&q * nudge) - &b).norm();
            prop_assert!(best <= other + 1e-9);
        }
    }
}
