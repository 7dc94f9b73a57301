//! Mean-centred truncated PCA per image domain.
//!
//! A [`PcaBasis`] is the linear encoder/decoder of one domain: codes are
//! `z = (x - mean) W` and images are recovered as `x = z Wᵀ + mean`. Component
//! signs are first canonicalised (largest-magnitude entry positive) and can then
//! be re-fixed from the data with [`align_skew`], which makes the sign choice
//! consistent between two domains related by an orthogonal map.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{ImageSet, ImageShape};
use crate::error::{Error, Result};
use crate::linalg;

/// Bound on `||WᵀW - I||_F` for freshly fitted bases.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Sample counts up to this size use the exact eigensolver under [`Solver::Auto`].
pub const EXACT_LIMIT: usize = 4096;

/// Relative skewness threshold: a component is flipped only when its cubic sum
/// exceeds `SKEW_REL_TOL * n * λ^{3/2}` in magnitude.
pub const SKEW_REL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Exact for `n <= EXACT_LIMIT`, randomized otherwise.
    Auto,
    /// Dense eigendecomposition of whichever of the Gram (`n x n`) or
    /// covariance (`d x d`) matrix is smaller.
    Exact,
    /// Randomized range finder followed by a small SVD.
    Randomized {
        oversample: usize,
        power_iters: usize,
    },
}

impl Solver {
    pub const RANDOMIZED_DEFAULT: Solver = Solver::Randomized {
        oversample: 10,
        power_iters: 2,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    mean: DVector<f64>,
    components: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    total_variance: f64,
    skew_aligned: bool,
    shape: ImageShape,
}

impl PcaBasis {
    /// Reassembles a basis from stored parts, re-checking every invariant.
    /// `ortho_tol` bounds `||WᵀW - I||_F`.
    pub fn from_parts(
        shape: ImageShape,
        mean: DVector<f64>,
        components: DMatrix<f64>,
        eigenvalues: DVector<f64>,
        total_variance: f64,
        skew_aligned: bool,
        ortho_tol: f64,
    ) -> Result<Self> {
        let basis = Self {
            mean,
            components,
            eigenvalues,
            total_variance,
            skew_aligned,
            shape,
        };
        basis.validate(ortho_tol)?;
        Ok(basis)
    }

    /// Re-checks dimensions, finiteness, spectrum ordering and
    /// `||WᵀW - I||_F <= ortho_tol`.
    pub fn validate(&self, ortho_tol: f64) -> Result<()> {
        self.shape.validate()?;
        let d = self.shape.dim();
        if self.mean.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.mean.len(),
            });
        }
        if self.components.nrows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.components.nrows(),
            });
        }
        let r = self.components.ncols();
        if r == 0 || r > d {
            return Err(Error::RankOutOfRange { rank: r, max: d });
        }
        if self.eigenvalues.len() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                found: self.eigenvalues.len(),
            });
        }
        let finite = self
            .mean
            .iter()
            .chain(self.components.iter())
            .chain(self.eigenvalues.iter())
            .all(|v| v.is_finite());
        if !finite || !self.total_variance.is_finite() {
            return Err(Error::NonFinite("PCA basis"));
        }
        let ev = self.eigenvalues.as_slice();
        if ev.iter().any(|&l| l < 0.0) || ev.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Invariant(
                "eigenvalues must be nonnegative and nonincreasing".into(),
            ));
        }
        let err = linalg::orthogonality_error(&self.components);
        if err > ortho_tol {
            return Err(Error::NotOrthogonal(err));
        }
        Ok(())
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// The `d x r` matrix `W` whose columns are the principal directions.
    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    /// Variances (1/n normalisation) along each component, nonincreasing.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Total variance of the training data (trace of its covariance).
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn skew_aligned(&self) -> bool {
        self.skew_aligned
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn rank(&self) -> usize {
        self.components.ncols()
    }

    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    /// Content fingerprint (FNV-1a over dimensions, spectrum and mean bits).
    pub fn id(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(self.dim() as u64);
        eat(self.rank() as u64);
        self.eigenvalues.iter().for_each(|v| eat(v.to_bits()));
        self.mean.iter().for_each(|v| eat(v.to_bits()));
        self.components
            .iter()
            .take(4096)
            .for_each(|v| eat(v.to_bits()));
        h
    }

    /// Same basis with every array rounded through f32.
    pub fn quantized(&self) -> Self {
        Self {
            mean: linalg::quantize_vector(&self.mean),
            components: linalg::quantize_matrix(&self.components),
            eigenvalues: linalg::quantize_vector(&self.eigenvalues),
            ..self.clone()
        }
    }

    /// Codes `(X - 1 meanᵀ) W` for a raw `n x d` matrix.
    pub fn encode(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if data.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: data.ncols(),
            });
        }
        Ok(center(data, &self.mean) * &self.components)
    }

    /// Unclamped images `Z Wᵀ + 1 meanᵀ` for an `n x r` code matrix.
    pub fn decode(&self, codes: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if codes.ncols() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.rank(),
                found: codes.ncols(),
            });
        }
        let mut out = codes * self.components.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(out)
    }
}

/// PCA codes of an image set, one row per image.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSet {
    pub codes: DMatrix<f64>,
    pub ids: Vec<String>,
    /// [`PcaBasis::id`] of the basis that produced the codes.
    pub basis_id: u64,
    pub skew_aligned: bool,
}

impl LatentSet {
    pub fn rank(&self) -> usize {
        self.codes.ncols()
    }

    pub fn len(&self) -> usize {
        self.codes.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.nrows() == 0
    }
}

/// One row of [`spectrum_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    /// 1-based component index.
    pub index: usize,
    pub eigenvalue: f64,
    /// Share of the total variance captured by components `1..=index`.
    pub cumulative_fraction: f64,
}

fn center(data: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = data.clone();
    for mut row in out.row_iter_mut() {
        row -= mean.transpose();
    }
    out
}

pub fn fit_pca(set: &ImageSet, rank: usize, seed: u64) -> Result<PcaBasis> {
    fit_pca_with(set, rank, seed, Solver::Auto)
}

/// Fits the top-`rank` principal components of `set`.
///
/// Eigenvalues use 1/n normalisation. Component signs are canonicalised so the
/// result depends only on the data (and `seed` for the randomized solver).
pub fn fit_pca_with(set: &ImageSet, rank: usize, seed: u64, solver: Solver) -> Result<PcaBasis> {
    let data = set.data();
    let (n, d) = data.shape();
    let max = (n - 1).min(d);
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { rank, max });
    }
    let mean = DVector::from_iterator(d, data.column_iter().map(|c| c.sum() / n as f64));
    let centered = center(data, &mean);
    let total_variance = centered.norm_squared() / n as f64;
    let first = data.row(0);
    if total_variance == 0.0 || data.row_iter().all(|r| r == first) {
        return Err(Error::DegenerateData);
    }

    let solver = match solver {
        Solver::Auto if n <= EXACT_LIMIT => Solver::Exact,
        Solver::Auto => Solver::RANDOMIZED_DEFAULT,
        s => s,
    };
    let (mut eigenvalues, mut components) = match solver {
        Solver::Exact => exact_pca(&centered, rank),
        Solver::Randomized {
            oversample,
            power_iters,
        } => randomized_pca(&centered, rank, oversample, power_iters, seed),
        Solver::Auto => unreachable!(),
    };
    eigenvalues.apply(|l| *l = l.max(0.0));
    for k in 0..rank {
        linalg::canonicalize_sign(&mut components, k);
    }
    PcaBasis::from_parts(
        set.shape(),
        mean,
        components,
        eigenvalues,
        total_variance,
        false,
        ORTHONORMAL_TOL,
    )
}

fn exact_pca(centered: &DMatrix<f64>, rank: usize) -> (DVector<f64>, DMatrix<f64>) {
    let (n, d) = centered.shape();
    let scale = 1.0 / n as f64;
    if d <= n {
        let cov = centered.tr_mul(centered) * scale;
        let (values, vectors) = linalg::symmetric_eigen_desc(cov);
        return (
            values.rows(0, rank).into_owned(),
            vectors.columns(0, rank).into_owned(),
        );
    }
    // Gram route: right singular vectors recovered as Xᵀu / sqrt(n λ).
    let gram = (centered * centered.transpose()) * scale;
    let (values, vectors) = linalg::symmetric_eigen_desc(gram);
    let top = values[0].max(0.0);
    let u = vectors.columns(0, rank);
    let mut w = centered.tr_mul(&u);
    let mut null = Vec::with_capacity(rank);
    for k in 0..rank {
        let lambda = values[k];
        let tiny = lambda <= top * 1e-20 || lambda <= 0.0;
        if !tiny {
            w.column_mut(k).unscale_mut(libm::sqrt(n as f64 * lambda));
        }
        null.push(tiny);
    }
    linalg::orthonormalize_columns(&mut w, &null);
    (values.rows(0, rank).into_owned(), w)
}

fn randomized_pca(
    centered: &DMatrix<f64>,
    rank: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> (DVector<f64>, DMatrix<f64>) {
    let (n, d) = centered.shape();
    let width = (rank + oversample).min(n.min(d));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(d, width, |_, _| StandardNormal.sample(&mut rng));
    let mut range = (centered * omega).qr().q();
    for _ in 0..power_iters {
        let back = centered.tr_mul(&range).qr().q();
        range = (centered * back).qr().q();
    }
    // B = Qᵀ X; the right singular vectors of B are the left ones of Bᵀ.
    let bt = centered.tr_mul(&range);
    let svd = bt.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    order.truncate(rank);
    let values = DVector::from_iterator(
        rank,
        order
            .iter()
            .map(|&i| svd.singular_values[i] * svd.singular_values[i] / n as f64),
    );
    (values, u.select_columns(&order))
}

/// Cubic sums `Σ_i (p_i - p̄)³` of the projections of `set` onto each component.
pub fn skewness(basis: &PcaBasis, set: &ImageSet) -> Result<Vec<f64>> {
    if set.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: set.dim(),
        });
    }
    let codes = basis.encode(set.data())?;
    let n = codes.nrows() as f64;
    Ok(codes
        .column_iter()
        .map(|p| {
            let m = p.sum() / n;
            p.iter().map(|v| (v - m) * (v - m) * (v - m)).sum()
        })
        .collect())
}

/// Fixes each component's sign so the projected data has nonnegative skew.
///
/// Components whose cubic sum is within `SKEW_REL_TOL * n * λ^{3/2}` of zero
/// fall back to the canonical sign. Applying this twice is a no-op.
pub fn align_skew(basis: &PcaBasis, set: &ImageSet) -> Result<PcaBasis> {
    let skews = skewness(basis, set)?;
    let n = set.len() as f64;
    let mut out = basis.clone();
    for (k, &skew) in skews.iter().enumerate() {
        let lambda = basis.eigenvalues[k];
        let eps = SKEW_REL_TOL * n * lambda * libm::sqrt(lambda);
        if skew.abs() <= eps {
            linalg::canonicalize_sign(&mut out.components, k);
        } else if skew < 0.0 {
            out.components.column_mut(k).neg_mut();
        }
    }
    out.skew_aligned = true;
    Ok(out)
}

/// Codes `Wᵀ(x_i - mean)` for every image of `set`.
pub fn project(basis: &PcaBasis, set: &ImageSet) -> Result<LatentSet> {
    Ok(LatentSet {
        codes: basis.encode(set.data())?,
        ids: set.ids().to_vec(),
        basis_id: basis.id(),
        skew_aligned: basis.skew_aligned,
    })
}

/// Images `clamp(W z_i + mean, 0, 1)` in the basis' image shape.
pub fn reconstruct(basis: &PcaBasis, latent: &LatentSet) -> Result<ImageSet> {
    let raw = basis.decode(&latent.codes)?;
    ImageSet::from_clamped(raw, basis.shape, latent.ids.clone())
}

/// Per-component eigenvalues with cumulative captured-variance fractions.
pub fn spectrum_report(basis: &PcaBasis) -> Vec<SpectrumRow> {
    let total = basis.total_variance;
    let mut acc = 0.0;
    basis
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &eigenvalue)| {
            acc += eigenvalue;
            SpectrumRow {
                index: k + 1,
                eigenvalue,
                cumulative_fraction: if total > 0.0 { acc / total } else { 0.0 },
            }
        })
        .collect()
}

/// Least-squares slope of `ln λ_k` against `ln k` over the positive eigenvalues.
/// A power-law spectrum `λ_k ∝ k^{-s}` gives slope `-s`.
pub fn power_law_slope(eigenvalues: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.0)
        .map(|(k, &l)| (libm::log((k + 1) as f64), libm::log(l)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}
