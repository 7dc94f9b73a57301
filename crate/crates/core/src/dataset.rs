//! Image sets as row matrices, plus reproducible shuffling and splitting.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, RowDVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Height, width and channel count of every image in a set.
///
/// Pixels are laid out row-major with interleaved channels, so the flattened
/// index of `(y, x, c)` is `(y * width + x) * channels + c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        let shape = Self {
            height,
            width,
            channels,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || !matches!(self.channels, 1 | 3) {
            return Err(Error::InvalidShape {
                height: self.height,
                width: self.width,
                channels: self.channels,
            });
        }
        Ok(())
    }

    /// Flattened length `d = height * width * channels`.
    pub fn dim(&self) -> usize {
        self.height * self.width * self.channels
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }
}

impl fmt::Display for ImageShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// An `n x d` matrix of flattened images with intensities in `[0, 1]`.
///
/// Rows carry stable string ids (file names when loaded from disk). A set is
/// immutable once built; every operation returns a fresh set.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    data: DMatrix<f64>,
    shape: ImageShape,
    ids: Vec<String>,
}

impl ImageSet {
    pub fn new(data: DMatrix<f64>, shape: ImageShape, ids: Vec<String>) -> Result<Self> {
        shape.validate()?;
        if data.nrows() == 0 {
            return Err(Error::EmptySet);
        }
        if data.ncols() != shape.dim() {
            return Err(Error::DimensionMismatch {
                expected: shape.dim(),
                found: data.ncols(),
            });
        }
        if ids.len() != data.nrows() {
            return Err(Error::IdCount {
                expected: ids.len(),
                found: data.nrows(),
            });
        }
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        for (row, r) in data.row_iter().enumerate() {
            if let Some(&value) = r.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::PixelOutOfRange { row, value });
            }
        }
        Ok(Self { data, shape, ids })
    }

    /// Builds a set from per-image pixel vectors.
    pub fn from_images(shape: ImageShape, ids: Vec<String>, images: &[Vec<f64>]) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::EmptySet);
        }
        let d = shape.dim();
        if let Some(bad) = images.iter().find(|im| im.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let data = DMatrix::from_fn(images.len(), d, |i, j| images[i][j]);
        Self::new(data, shape, ids)
    }

    /// Clamps every entry into `[0, 1]` before building the set.
    pub fn from_clamped(
        mut data: DMatrix<f64>,
        shape: ImageShape,
        ids: Vec<String>,
    ) -> Result<Self> {
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("image data"));
        }
        data.apply(|v| *v = v.clamp(0.0, 1.0));
        Self::new(data, shape, ids)
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    /// Always false for a constructed set; present for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Copy of image `i` as a flat pixel vector.
    pub fn image(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    pub fn images(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.image(i))
    }

    pub fn into_parts(self) -> (DMatrix<f64>, ImageShape, Vec<String>) {
        (self.data, self.shape, self.ids)
    }

    /// Rows `indices` in the given order. Indices must be in range and distinct.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut rows = Vec::with_capacity(indices.len());
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.len(),
                    found: i,
                });
            }
            rows.push(self.data.row(i).into_owned());
            ids.push(self.ids[i].clone());
        }
        Self::new(DMatrix::from_rows(&rows), self.shape, ids)
    }

    /// Same images under new ids.
    pub fn with_ids(&self, ids: Vec<String>) -> Result<Self> {
        Self::new(self.data.clone(), self.shape, ids)
    }

    /// Applies `f` to each image and collects the results under `shape`.
    pub fn map_images<F>(&self, shape: ImageShape, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mut rows: Vec<RowDVector<f64>> = Vec::with_capacity(self.len());
        for img in self.images() {
            let out = f(&img);
            if out.len() != shape.dim() {
                return Err(Error::DimensionMismatch {
                    expected: shape.dim(),
                    found: out.len(),
                });
            }
            rows.push(RowDVector::from_vec(out));
        }
        Self::new(DMatrix::from_rows(&rows), shape, self.ids.clone())
    }
}

/// Seeded uniform permutation of `0..n` (Fisher-Yates over ChaCha8).
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order
}

/// Rows of `set` reordered so that output row `i` is input row `permutation(n, seed)[i]`.
pub fn permute(set: &ImageSet, seed: u64) -> ImageSet {
    let order = permutation(set.len(), seed);
    set.select(&order)
        .expect("a permutation selects every row exactly once")
}

/// Seeded partition of `0..n` into two ascending index lists, the first of
/// length `round(n * fraction)`. Fails if either side would be empty.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let k = libm::round(n as f64 * fraction);
    if !(fraction > 0.0 && fraction < 1.0) || k < 1.0 || k >= n as f64 {
        return Err(Error::EmptySplit { n, fraction });
    }
    let order = permutation(n, seed);
    let (first, second) = order.split_at(k as usize);
    let mut first = first.to_vec();
    let mut second = second.to_vec();
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

/// Splits `set` into two disjoint sets per [`split_indices`]. Both sides keep
/// the original relative row order.
pub fn split_shuffle(set: &ImageSet, fraction: f64, seed: u64) -> Result<(ImageSet, ImageSet)> {
    let (first, second) = split_indices(set.len(), fraction, seed)?;
    Ok((set.select(&first)?, set.select(&second)?))
}
