//! The end-to-end map `x_B = mean_B + ((x_A - mean_A) W_A Q) W_Bᵀ` and the
//! pipeline that fits it.

use serde::{Deserialize, Serialize};

use crate::align::{fit_icp, fit_paired, Correspondence, IcpConfig, LatentMap};
use crate::dataset::ImageSet;
use crate::error::{Error, Result};
use crate::linalg::single_precision_tolerance;
use crate::pca::{align_skew, fit_pca, project, PcaBasis};

/// Where the correspondences used to fit `Q` come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Best-buddy ICP on unpaired sets.
    #[default]
    Unsupervised,
    /// Known pairs, a single solve.
    Supervised,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub rank: usize,
    pub seed: u64,
    pub skew_align: bool,
    pub pairing: Pairing,
    pub icp: IcpConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rank: 100,
            seed: 0,
            skew_align: true,
            pairing: Pairing::Unsupervised,
            icp: IcpConfig::default(),
        }
    }
}

/// Both PCA bases plus the latent map.
///
/// Parameters are held at single precision (every array is rounded through
/// f32 on construction), matching the model file, so a save/load round trip
/// is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Translator {
    basis_a: PcaBasis,
    basis_b: PcaBasis,
    map: LatentMap,
    /// Seconds since the Unix epoch.
    created: u64,
    config: FitConfig,
}

impl Translator {
    pub fn new(
        basis_a: PcaBasis,
        basis_b: PcaBasis,
        mut map: LatentMap,
        created: u64,
        config: FitConfig,
    ) -> Result<Self> {
        let r = map.rank();
        if basis_a.rank() != r || basis_b.rank() != r {
            return Err(Error::Invariant(alloc::format!(
                "ranks disagree: basis A {}, basis B {}, map {r}",
                basis_a.rank(),
                basis_b.rank()
            )));
        }
        let basis_a = basis_a.quantized();
        let basis_b = basis_b.quantized();
        map.q = crate::linalg::quantize_matrix(&map.q);
        let tol = single_precision_tolerance(r);
        basis_a.validate(tol)?;
        basis_b.validate(tol)?;
        map.validate(tol)?;
        Ok(Self {
            basis_a,
            basis_b,
            map,
            created,
            config,
        })
    }

    pub fn basis_a(&self) -> &PcaBasis {
        &self.basis_a
    }

    pub fn basis_b(&self) -> &PcaBasis {
        &self.basis_b
    }

    pub fn map(&self) -> &LatentMap {
        &self.map
    }

    pub fn created(&self) -> u64 {
        self.created
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn with_created(mut self, created: u64) -> Self {
        self.created = created;
        self
    }

    /// Translates every image of domain A into domain B; ids are kept.
    pub fn translate(&self, set: &ImageSet) -> Result<ImageSet> {
        if set.shape() != self.basis_a.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.basis_a.shape(),
                found: set.shape(),
            });
        }
        let codes = self.basis_a.encode(set.data())?;
        let raw = self.basis_b.decode(&self.map.apply(&codes)?)?;
        ImageSet::from_clamped(raw, self.basis_b.shape(), set.ids().to_vec())
    }
}

fn check_rank(set: &ImageSet, rank: usize) -> Result<()> {
    let max = (set.len() - 1).min(set.dim());
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { rank, max });
    }
    Ok(())
}

/// Fits both bases, aligns skew (unless disabled) and learns `Q`.
///
/// `pairing` is required when `config.pairing` is supervised and ignored otherwise.
/// The returned translator has `created = 0`.
pub fn fit(
    a: &ImageSet,
    b: &ImageSet,
    config: &FitConfig,
    pairing: Option<&Correspondence>,
) -> Result<Translator> {
    check_rank(a, config.rank)?;
    check_rank(b, config.rank)?;
    if config.pairing == crate::translator::Pairing::Supervised
        && pairing.is_none_or(|p| p.is_empty())
    {
        return Err(Error::EmptyPairing);
    }
    let mut basis_a = fit_pca(a, config.rank, config.seed)?;
    let mut basis_b = fit_pca(b, config.rank, config.seed)?;
    if config.skew_align {
        basis_a = align_skew(&basis_a, a)?;
        basis_b = align_skew(&basis_b, b)?;
    }
    let za = project(&basis_a, a)?;
    let zb = project(&basis_b, b)?;
    let map = match (config.pairing, pairing) {
        (Pairing::Supervised, Some(p)) => {
            fit_paired(&za, &zb, p, config.icp.mode, config.icp.ridge)?
        }
        _ => fit_icp(&za, &zb, &config.icp)?,
    };
    Translator::new(basis_a, basis_b, map, 0, *config)
}
