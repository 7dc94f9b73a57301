//! Synthetic image corpora with controlled covariance structure.
//!
//! [`PowerLawGenerator`] draws images from a fixed linear model
//! `x = 0.5 + Σ_k sqrt(λ_k) g_k φ_k` over smooth orthonormal basis images
//! `φ_k`, with `λ_k ∝ k^{-s}` and skewed unit-variance coefficients
//! `g_k = Exp(1) - 1`. It is the stand-in for natural-image datasets in the
//! test and acceptance suites.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::dataset::{ImageSet, ImageShape};
use crate::error::{Error, Result};

/// Spatial smoothing (Gaussian sigma, pixels) applied to basis noise fields.
const BASIS_BLUR: f64 = 1.5;

#[derive(Debug, Clone)]
pub struct PowerLawGenerator {
    shape: ImageShape,
    basis: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

fn blur_plane(plane: &mut [f64], h: usize, w: usize, sigma: f64) {
    let radius = libm::ceil(3.0 * sigma) as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let norm: f64 = taps.iter().sum();
    let (hi, wi) = (h as isize, w as isize);
    let mut tmp = alloc::vec![0.0; h * w];
    for y in 0..hi {
        for x in 0..wi {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xx = (x + k as isize - radius).clamp(0, wi - 1);
                acc += t * plane[(y * wi + xx) as usize];
            }
            tmp[(y * wi + x) as usize] = acc / norm;
        }
    }
    for y in 0..hi {
        for x in 0..wi {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let yy = (y + k as isize - radius).clamp(0, hi - 1);
                acc += t * tmp[(yy * wi + x) as usize];
            }
            plane[(y * wi + x) as usize] = acc / norm;
        }
    }
}

fn smooth_field(shape: ImageShape, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (h, w, c) = (shape.height, shape.width, shape.channels);
    let mut luma: Vec<f64> = (0..h * w).map(|_| StandardNormal.sample(rng)).collect();
    blur_plane(&mut luma, h, w, BASIS_BLUR);
    if c == 1 {
        return luma;
    }
    // Colour channels share the luminance field with mild gain changes plus a
    // weaker independent component, as in natural images.
    let mut out = alloc::vec![0.0; h * w * c];
    for ch in 0..c {
        let g: f64 = StandardNormal.sample(rng);
        let gain = 1.0 + 0.3 * g;
        let mut own: Vec<f64> = (0..h * w).map(|_| StandardNormal.sample(rng)).collect();
        blur_plane(&mut own, h, w, BASIS_BLUR);
        for p in 0..h * w {
            out[p * c + ch] = gain * luma[p] + 0.2 * own[p];
        }
    }
    out
}

impl PowerLawGenerator {
    /// `components` basis images with variances `λ_k ∝ k^{-exponent}`, scaled so
    /// the average per-pixel standard deviation is `pixel_std`.
    pub fn new(
        shape: ImageShape,
        components: usize,
        exponent: f64,
        pixel_std: f64,
        seed: u64,
    ) -> Result<Self> {
        shape.validate()?;
        let d = shape.dim();
        if components == 0 || components > d {
            return Err(Error::RankOutOfRange {
                rank: components,
                max: d,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut raw = DMatrix::zeros(d, components);
        for k in 0..components {
            let field = smooth_field(shape, &mut rng);
            raw.column_mut(k).copy_from_slice(&field);
        }
        let basis = raw.qr().q();
        let weights: Vec<f64> = (1..=components)
            .map(|k| libm::pow(k as f64, -exponent))
            .collect();
        let scale = d as f64 * pixel_std * pixel_std / weights.iter().sum::<f64>();
        let eigenvalues = DVector::from_iterator(components, weights.iter().map(|w| w * scale));
        Ok(Self {
            shape,
            basis,
            eigenvalues,
        })
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    /// Population variances along the basis images.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal `d x k` basis images.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Unclamped samples as an `n x d` matrix.
    pub fn sample_raw(&self, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.eigenvalues.len();
        let coeffs = DMatrix::from_fn(n, k, |_, j| {
            let g: f64 = Exp1.sample(&mut rng);
            (g - 1.0) * libm::sqrt(self.eigenvalues[j])
        });
        let mut x = coeffs * self.basis.transpose();
        x.add_scalar_mut(0.5);
        x
    }

    /// `n` images clamped to `[0, 1]`, ids `{prefix}{i:05}.png`.
    pub fn sample(&self, n: usize, seed: u64, prefix: &str) -> Result<ImageSet> {
        ImageSet::from_clamped(
            self.sample_raw(n, seed),
            self.shape,
            sequential_ids(prefix, n),
        )
    }
}

pub fn sequential_ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i:05}.png")).collect()
}

/// Independent `N(0.5, std²)` pixels, clamped to `[0, 1]`.
pub fn isotropic(shape: ImageShape, n: usize, std: f64, seed: u64) -> Result<ImageSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = DMatrix::from_fn(n, shape.dim(), |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        0.5 + std * g
    });
    ImageSet::from_clamped(data, shape, sequential_ids("iso", n))
}

/// Haar-distributed random orthogonal `r x r` matrix (QR of a Gaussian matrix
/// with the sign of `R`'s diagonal folded back into `Q`).
pub fn random_orthogonal(r: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(r, r, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let mut q = qr.q();
    let rm = qr.r();
    for k in 0..r {
        if rm[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Rotation by `angle` radians in the plane spanned by two random orthonormal
/// directions of `R^r`.
pub fn plane_rotation(r: usize, angle: f64, seed: u64) -> DMatrix<f64> {
    let basis = random_orthogonal(r, seed);
    let u = basis.column(0).clone_owned();
    let v = basis.column(1).clone_owned();
    let (s, c) = (libm::sin(angle), libm::cos(angle));
    let mut m = DMatrix::identity(r, r);
    m += (&u * u.transpose() + &v * v.transpose()) * (c - 1.0);
    m += (&v * u.transpose() - &u * v.transpose()) * s;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthogonality_error;

    #[test]
    fn random_orthogonal_is_orthogonal() {
        assert!(orthogonality_error(&random_orthogonal(16, 3)) < 1e-12);
        let rot = plane_rotation(6, 0.05, 2);
        assert!(orthogonality_error(&rot) < 1e-12);
        assert!((rot.trace() - (4.0 + 2.0 * libm::cos(0.05))).abs() < 1e-12);
    }

    #[test]
    fn generator_basis_is_orthonormal() {
        let g =
            PowerLawGenerator::new(ImageShape::new(8, 8, 3).unwrap(), 40, 1.5, 0.05, 1).unwrap();
        assert!(orthogonality_error(g.basis()) < 1e-12);
        let total: f64 = g.eigenvalues().iter().sum();
        assert!((total - 192.0 * 0.0025).abs() < 1e-12);
        let set = g.sample(10, 4, "s").unwrap();
        assert_eq!(set.len(), 10);
        assert_eq!(set.ids()[3], "s00003.png");
    }
}
