//! Linear unsupervised image-to-image translation.
//!
//! Each image domain is encoded with its own truncated PCA basis, component
//! signs are fixed by skewness, and the two latent spaces are related by an
//! `r x r` matrix `Q` learned with best-buddy ICP and orthogonal Procrustes.
//! The full map from domain A to domain B is
//!
//! ```text
//! x_B = mean_B + ((x_A - mean_A) W_A Q) W_Bᵀ
//! ```
//!
//! with images and codes as row vectors.
//!
//! The crate is `no_std` (it needs `alloc`). The `parallel` feature pulls in
//! `std` and spreads nearest-neighbour search over a rayon pool.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod align;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod pca;
pub mod synth;
pub mod tasks;
pub mod translator;

pub use align::{Correspondence, IcpConfig, LatentMap, MapMode};
pub use dataset::{ImageSet, ImageShape};
pub use error::{Error, Result};
pub use pca::{LatentSet, PcaBasis};
pub use tasks::{Protocol, TaskName, TaskSpec};
pub use translator::{fit, FitConfig, Pairing, Translator};
