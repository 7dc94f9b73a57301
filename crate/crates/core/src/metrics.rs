//! Image-set comparison: per-image MSE and SSIM, and paired distance scatter.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::Correspondence;
use crate::dataset::{ImageSet, ImageShape};
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
/// `(K1 L)²` with `K1 = 0.01` and dynamic range `L = 1`.
pub const SSIM_C1: f64 = 0.01 * 0.01;
/// `(K2 L)²` with `K2 = 0.03` and dynamic range `L = 1`.
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub id: String,
    pub mse: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_image: Vec<ImageScore>,
    pub mean_mse: f64,
    pub mean_ssim: f64,
}

/// Shapes must match and ids must agree row by row; nothing is re-matched.
fn check_aligned(pred: &ImageSet, target: &ImageSet) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            expected: target.shape(),
            found: pred.shape(),
        });
    }
    if pred.len() != target.len() {
        return Err(Error::IdCount {
            expected: target.len(),
            found: pred.len(),
        });
    }
    for (row, (p, t)) in pred.ids().iter().zip(target.ids()).enumerate() {
        if p != t {
            return Err(Error::IdMismatch {
                row,
                pred: p.clone(),
                target: t.clone(),
            });
        }
    }
    Ok(())
}

/// Mean squared pixel difference per image.
pub fn mse(pred: &ImageSet, target: &ImageSet) -> Result<Vec<f64>> {
    check_aligned(pred, target)?;
    let d = pred.dim() as f64;
    Ok((0..pred.len())
        .map(|i| (pred.data().row(i) - target.data().row(i)).norm_squared() / d)
        .collect())
}

/// Normalised 1-D Gaussian taps of the SSIM window.
pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - c;
        *v = libm::exp(-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable "valid" filtering of an `h x w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = alloc::vec![0.0; h * ow];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = taps
                .iter()
                .zip(&row[x..x + SSIM_WINDOW])
                .map(|(t, v)| t * v)
                .sum();
        }
    }
    let mut out = alloc::vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * horiz[(y + k) * ow + x])
                .sum();
        }
    }
    out
}

/// Single-scale SSIM of two images of `shape`, averaged over channels.
pub fn ssim_image(a: &[f64], b: &[f64], shape: ImageShape) -> Result<f64> {
    let (h, w, c) = (shape.height, shape.width, shape.channels);
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            height: h,
            width: w,
            window: SSIM_WINDOW,
        });
    }
    if a.len() != shape.dim() || b.len() != shape.dim() {
        return Err(Error::DimensionMismatch {
            expected: shape.dim(),
            found: a.len().min(b.len()),
        });
    }
    let taps = gaussian_window();
    let mut total = 0.0;
    for ch in 0..c {
        let x: Vec<f64> = a.iter().skip(ch).step_by(c).copied().collect();
        let y: Vec<f64> = b.iter().skip(ch).step_by(c).copied().collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mx = filter_valid(&x, h, w, &taps);
        let my = filter_valid(&y, h, w, &taps);
        let exx = filter_valid(&xx, h, w, &taps);
        let eyy = filter_valid(&yy, h, w, &taps);
        let exy = filter_valid(&xy, h, w, &taps);
        let mut sum = 0.0;
        for k in 0..mx.len() {
            let (ux, uy) = (mx[k], my[k]);
            let vx = exx[k] - ux * ux;
            let vy = eyy[k] - uy * uy;
            let cov = exy[k] - ux * uy;
            sum += ((2.0 * ux * uy + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ux * ux + uy * uy + SSIM_C1) * (vx + vy + SSIM_C2));
        }
        total += sum / mx.len() as f64;
    }
    Ok(total / c as f64)
}

/// SSIM per image (11x11 Gaussian window, sigma 1.5, mean over valid positions).
pub fn ssim(pred: &ImageSet, target: &ImageSet) -> Result<Vec<f64>> {
    check_aligned(pred, target)?;
    let shape = pred.shape();
    (0..pred.len())
        .map(|i| ssim_image(&pred.image(i), &target.image(i), shape))
        .collect()
}

pub fn evaluate(pred: &ImageSet, target: &ImageSet) -> Result<EvalReport> {
    let m = mse(pred, target)?;
    let s = ssim(pred, target)?;
    let n = m.len() as f64;
    let per_image = pred
        .ids()
        .iter()
        .zip(m.iter().zip(&s))
        .map(|(id, (&mse, &ssim))| ImageScore {
            id: id.clone(),
            mse,
            ssim,
        })
        .collect();
    Ok(EvalReport {
        per_image,
        mean_mse: m.iter().sum::<f64>() / n,
        mean_ssim: s.iter().sum::<f64>() / n,
    })
}

/// Pairwise L2 distances within A and within B for `n_pairs` random pairs of
/// corresponding samples: row `(|a_i - a_j|, |b_i - b_j|)` with `i != j`.
pub fn distance_scatter(
    set_a: &ImageSet,
    set_b: &ImageSet,
    pairing: &Correspondence,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let k = pairing.len();
    if k < 2 {
        return Err(Error::TooFewPairs(k));
    }
    if let Some(&(a, b)) = pairing
        .pairs()
        .iter()
        .find(|&&(a, b)| a >= set_a.len() || b >= set_b.len())
    {
        return Err(Error::InvalidPair { a, b });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (da, db) = (set_a.data(), set_b.data());
    let mut rows = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let p = rng.random_range(0..k);
        let mut q = rng.random_range(0..k - 1);
        if q >= p {
            q += 1;
        }
        let (ai, bi) = pairing.pairs()[p];
        let (aj, bj) = pairing.pairs()[q];
        rows.push((
            (da.row(ai) - da.row(aj)).norm(),
            (db.row(bi) - db.row(bj)).norm(),
        ));
    }
    Ok(rows)
}

/// Pearson correlation of the two columns; 0 when either is constant.
pub fn pearson(rows: &[(f64, f64)]) -> f64 {
    let n = rows.len() as f64;
    if rows.len() < 2 {
        return 0.0;
    }
    let mx = rows.iter().map(|r| r.0).sum::<f64>() / n;
    let my = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in rows {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / libm::sqrt(sxx * syy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;
    use nalgebra::DMatrix;

    fn constant(n: usize, shape: ImageShape, v: f64) -> ImageSet {
        let ids = (0..n).map(|i| format!("{i}")).collect();
        ImageSet::new(DMatrix::from_element(n, shape.dim(), v), shape, ids).unwrap()
    }

    #[test]
    fn mse_extremes() {
        let shape = ImageShape::new(4, 4, 1).unwrap();
        assert_eq!(
            mse(&constant(2, shape, 0.0), &constant(2, shape, 1.0)).unwrap(),
            vec![1.0, 1.0]
        );
        assert_eq!(
            mse(&constant(1, shape, 0.3), &constant(1, shape, 0.3)).unwrap(),
            vec![0.0]
        );
    }

    #[test]
    fn mse_single_pixel() {
        let shape = ImageShape::new(4, 4, 1).unwrap();
        let t = constant(1, shape, 0.25);
        let mut data = t.data().clone();
        data[(0, 5)] = 0.75;
        let p = ImageSet::new(data, shape, t.ids().to_vec()).unwrap();
        assert_eq!(mse(&p, &t).unwrap(), vec![0.015625]);
    }

    #[test]
    fn ssim_constant_images_closed_form() {
        let shape = ImageShape::new(12, 12, 1).unwrap();
        let s = ssim(&constant(1, shape, 0.5), &constant(1, shape, 0.6)).unwrap()[0];
        let expected = (2.0 * 0.5 * 0.6 + SSIM_C1) / (0.25 + 0.36 + SSIM_C1);
        assert!((s - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_small_image_error() {
        let shape = ImageShape::new(10, 20, 1).unwrap();
        let x = constant(1, shape, 0.5);
        assert!(matches!(ssim(&x, &x), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn misaligned_ids_rejected() {
        let shape = ImageShape::new(11, 11, 1).unwrap();
        let a = constant(2, shape, 0.5);
        let b = a.with_ids(vec!["0".into(), "x".into()]).unwrap();
        assert!(matches!(mse(&a, &b), Err(Error::IdMismatch { row: 1, .. })));
        let c = constant(2, ImageShape::new(11, 11, 3).unwrap(), 0.5);
        assert!(matches!(evaluate(&a, &c), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn window_is_normalised_and_symmetric() {
        let w = gaussian_window();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w[0], w[10]);
        assert!(w[5] > w[4]);
    }

    #[test]
    fn scatter_identity_pairing() {
        let shape = ImageShape::new(2, 2, 1).unwrap();
        let ids = (0..5).map(|i| format!("{i}")).collect();
        let set = ImageSet::new(
            DMatrix::from_fn(5, 4, |i, j| ((i + j) % 3) as f64 / 2.0),
            shape,
            ids,
        )
        .unwrap();
        let rows = distance_scatter(&set, &set, &Correspondence::identity(5), 50, 1).unwrap();
        assert_eq!(rows.len(), 50);
        assert!(rows.iter().all(|r| r.0 == r.1));
        assert_eq!(
            rows,
            distance_scatter(&set, &set, &Correspondence::identity(5), 50, 1).unwrap()
        );
        assert_eq!(
            distance_scatter(&set, &set, &Correspondence::identity(1), 5, 1),
            Err(Error::TooFewPairs(1))
        );
    }
}
