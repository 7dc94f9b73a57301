//! Synthetic domain pairs: domain A is manufactured from domain B by a known
//! image transformation, under either the paired-shuffled or the nonmatching
//! protocol.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::align::Correspondence;
use crate::dataset::{permutation, split_indices, ImageSet, ImageShape};
use crate::error::{Error, Result};

pub const DEFAULT_SUPER_RES_FACTOR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskName {
    /// Vertically flipped.
    Vflip,
    /// Rotated 90 degrees to the left.
    Rotate,
    /// BT.601 luma grayscale of an RGB image.
    Colorize,
    /// A rectangle set to zero.
    Inpaint,
    /// Sobel gradient magnitude.
    EdgesToReal,
    /// Block-average downsampling.
    SuperRes,
}

impl TaskName {
    pub const ALL: [TaskName; 6] = [
        TaskName::Vflip,
        TaskName::Rotate,
        TaskName::Colorize,
        TaskName::Inpaint,
        TaskName::EdgesToReal,
        TaskName::SuperRes,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskName::Vflip => "vflip",
            TaskName::Rotate => "rotate",
            TaskName::Colorize => "colorize",
            TaskName::Inpaint => "inpaint",
            TaskName::EdgesToReal => "edges-to-real",
            TaskName::SuperRes => "super-res",
        }
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidTask(format!("unknown task `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// A holds the transformed source images in shuffled order; B is the source.
    #[default]
    PairedShuffled,
    /// A and B come from disjoint halves of the source.
    Nonmatching,
}

/// Pixel rectangle, top-left corner plus extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl MaskRect {
    /// Centred rectangle with half the height and half the width (a quarter of the area).
    pub fn centered_quarter(shape: ImageShape) -> Self {
        let height = (shape.height / 2).max(1);
        let width = (shape.width / 2).max(1);
        Self {
            top: (shape.height - height) / 2,
            left: (shape.width - width) / 2,
            height,
            width,
        }
    }

    fn fits(&self, shape: ImageShape) -> bool {
        self.height > 0
            && self.width > 0
            && self.top + self.height <= shape.height
            && self.left + self.width <= shape.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskParams {
    /// Inpaint rectangle; defaults to [`MaskRect::centered_quarter`].
    pub mask: Option<MaskRect>,
    /// Super-res downsampling factor; defaults to [`DEFAULT_SUPER_RES_FACTOR`].
    pub factor: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: TaskName,
    #[serde(default)]
    pub params: TaskParams,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub seed: u64,
}

impl TaskSpec {
    pub fn new(name: TaskName, protocol: Protocol, seed: u64) -> Self {
        Self {
            name,
            params: TaskParams::default(),
            protocol,
            seed,
        }
    }

    pub fn mask(&self, shape: ImageShape) -> MaskRect {
        self.params
            .mask
            .unwrap_or_else(|| MaskRect::centered_quarter(shape))
    }

    pub fn factor(&self) -> usize {
        self.params.factor.unwrap_or(DEFAULT_SUPER_RES_FACTOR)
    }

    /// Checks that the task can be applied to images of `shape`.
    pub fn validate(&self, shape: ImageShape) -> Result<()> {
        shape.validate()?;
        match self.name {
            TaskName::Colorize if shape.channels != 3 => Err(Error::InvalidTask(format!(
                "colorize needs RGB input, got {shape}"
            ))),
            TaskName::Inpaint if !self.mask(shape).fits(shape) => Err(Error::InvalidTask(format!(
                "mask {:?} does not fit in {shape} or has zero area",
                self.mask(shape)
            ))),
            TaskName::SuperRes => {
                let f = self.factor();
                if f == 0 || !shape.height.is_multiple_of(f) || !shape.width.is_multiple_of(f) {
                    Err(Error::InvalidTask(format!(
                        "factor {f} does not divide {}x{}",
                        shape.height, shape.width
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Shape of the transformed images.
    pub fn output_shape(&self, shape: ImageShape) -> Result<ImageShape> {
        self.validate(shape)?;
        Ok(match self.name {
            TaskName::Rotate => ImageShape {
                height: shape.width,
                width: shape.height,
                ..shape
            },
            TaskName::Colorize => ImageShape {
                channels: 1,
                ..shape
            },
            TaskName::SuperRes => ImageShape {
                height: shape.height / self.factor(),
                width: shape.width / self.factor(),
                ..shape
            },
            _ => shape,
        })
    }
}

pub fn vflip(img: &[f64], shape: ImageShape) -> Vec<f64> {
    let row = shape.width * shape.channels;
    img.chunks_exact(row).rev().flatten().copied().collect()
}

/// 90 degree counter-clockwise rotation; the output is `width x height`.
pub fn rotate_left(img: &[f64], shape: ImageShape) -> Vec<f64> {
    let (h, w, c) = (shape.height, shape.width, shape.channels);
    let mut out = Vec::with_capacity(img.len());
    // Output row i, column j comes from input row j, column w - 1 - i.
    for i in 0..w {
        for j in 0..h {
            let src = shape.index(j, w - 1 - i, 0);
            out.extend_from_slice(&img[src..src + c]);
        }
    }
    out
}

pub fn grayscale(img: &[f64]) -> Vec<f64> {
    img.chunks_exact(3)
        .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
        .collect()
}

pub fn zero_mask(img: &[f64], shape: ImageShape, mask: MaskRect) -> Vec<f64> {
    let mut out = img.to_vec();
    for y in mask.top..mask.top + mask.height {
        let start = shape.index(y, mask.left, 0);
        let end = shape.index(y, mask.left + mask.width - 1, shape.channels - 1) + 1;
        out[start..end].fill(0.0);
    }
    out
}

/// Per-channel 3x3 Sobel gradient magnitude with replicated borders,
/// normalised by the image-wide maximum (all zeros if that is below 1e-8).
pub fn sobel_edges(img: &[f64], shape: ImageShape) -> Vec<f64> {
    let (h, w, c) = (shape.height as isize, shape.width as isize, shape.channels);
    let at = |y: isize, x: isize, ch: usize| {
        let y = y.clamp(0, h - 1) as usize;
        let x = x.clamp(0, w - 1) as usize;
        img[shape.index(y, x, ch)]
    };
    let mut out = alloc::vec![0.0; img.len()];
    let mut max = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let gx = (at(y - 1, x + 1, ch) + 2.0 * at(y, x + 1, ch) + at(y + 1, x + 1, ch))
                    - (at(y - 1, x - 1, ch) + 2.0 * at(y, x - 1, ch) + at(y + 1, x - 1, ch));
                let gy = (at(y + 1, x - 1, ch) + 2.0 * at(y + 1, x, ch) + at(y + 1, x + 1, ch))
                    - (at(y - 1, x - 1, ch) + 2.0 * at(y - 1, x, ch) + at(y - 1, x + 1, ch));
                let m = libm::sqrt(gx * gx + gy * gy);
                out[shape.index(y as usize, x as usize, ch)] = m;
                max = max.max(m);
            }
        }
    }
    if max < 1e-8 {
        out.fill(0.0);
    } else {
        out.iter_mut().for_each(|v| *v /= max);
    }
    out
}

/// Block-average downsampling by `factor`, which must divide height and width.
pub fn downsample(img: &[f64], shape: ImageShape, factor: usize) -> Vec<f64> {
    let (oh, ow, c) = (shape.height / factor, shape.width / factor, shape.channels);
    let norm = (factor * factor) as f64;
    let mut out = alloc::vec![0.0; oh * ow * c];
    for y in 0..shape.height {
        for x in 0..shape.width {
            for ch in 0..c {
                out[((y / factor) * ow + x / factor) * c + ch] += img[shape.index(y, x, ch)];
            }
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Applies the task's transformation to every image of `set`; ids are kept.
pub fn apply_task(spec: &TaskSpec, set: &ImageSet) -> Result<ImageSet> {
    let shape = set.shape();
    let out_shape = spec.output_shape(shape)?;
    match spec.name {
        TaskName::Vflip => set.map_images(out_shape, |im| vflip(im, shape)),
        TaskName::Rotate => set.map_images(out_shape, |im| rotate_left(im, shape)),
        TaskName::Colorize => set.map_images(out_shape, grayscale),
        TaskName::Inpaint => {
            let mask = spec.mask(shape);
            set.map_images(out_shape, |im| zero_mask(im, shape, mask))
        }
        TaskName::EdgesToReal => set.map_images(out_shape, |im| sobel_edges(im, shape)),
        TaskName::SuperRes => {
            let f = spec.factor();
            set.map_images(out_shape, |im| downsample(im, shape, f))
        }
    }
}

/// How the rows of a generated pair relate to the source set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairingRecord {
    /// Paired-shuffled: A row `i` is the transformed source row `permutation[i]`,
    /// and B is the source itself.
    Permutation(Vec<usize>),
    /// Nonmatching: source rows that went into A and into B.
    Split {
        a_source: Vec<usize>,
        b_source: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainPair {
    pub a: ImageSet,
    pub b: ImageSet,
    pub record: PairingRecord,
}

impl DomainPair {
    /// Ground-truth pairs `(row in A, row in B)`; `None` under the nonmatching protocol.
    pub fn correspondence(&self) -> Option<Correspondence> {
        match &self.record {
            PairingRecord::Permutation(perm) => Some(
                Correspondence::new(
                    perm.iter().enumerate().map(|(i, &j)| (i, j)).collect(),
                    self.a.len(),
                    self.b.len(),
                )
                .expect("a permutation is one-to-one"),
            ),
            PairingRecord::Split { .. } => None,
        }
    }
}

fn anonymous_id(position: usize, width: usize, source_id: &str) -> String {
    let ext = source_id.rfind('.').map(|i| &source_id[i..]).unwrap_or("");
    format!("a{position:0width$}{ext}")
}

/// Builds domain A from `source` under `spec.protocol`; domain B is drawn
/// from `source` unchanged.
///
/// Under the paired-shuffled protocol A's rows are renamed `a00000...` in
/// shuffled order so ids do not reveal the pairing; the permutation is kept in
/// the returned record.
pub fn make_domain_pair(spec: &TaskSpec, source: &ImageSet) -> Result<DomainPair> {
    match spec.protocol {
        Protocol::PairedShuffled => {
            let transformed = apply_task(spec, source)?;
            let perm = permutation(source.len(), spec.seed);
            let shuffled = transformed.select(&perm)?;
            let width = format!("{}", source.len().saturating_sub(1)).len().max(5);
            let ids = perm
                .iter()
                .enumerate()
                .map(|(i, &j)| anonymous_id(i, width, &source.ids()[j]))
                .collect();
            Ok(DomainPair {
                a: shuffled.with_ids(ids)?,
                b: source.clone(),
                record: PairingRecord::Permutation(perm),
            })
        }
        Protocol::Nonmatching => {
            let (first, second) = split_indices(source.len(), 0.5, spec.seed)?;
            let a = apply_task(spec, &source.select(&first)?)?;
            let b = source.select(&second)?;
            Ok(DomainPair {
                a,
                b,
                record: PairingRecord::Split {
                    a_source: first,
                    b_source: second,
                },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use nalgebra::DMatrix;

    fn ramp_set(n: usize, shape: ImageShape) -> ImageSet {
        let d = shape.dim();
        let data = DMatrix::from_fn(n, d, |i, j| ((i * 31 + j * 7) % 97) as f64 / 96.0);
        let ids = (0..n).map(|i| format!("img{i:03}.png")).collect();
        ImageSet::new(data, shape, ids).unwrap()
    }

    #[test]
    fn vflip_is_an_involution() {
        let shape = ImageShape::new(4, 3, 3).unwrap();
        let set = ramp_set(3, shape);
        let spec = TaskSpec::new(TaskName::Vflip, Protocol::PairedShuffled, 0);
        let twice = apply_task(&spec, &apply_task(&spec, &set).unwrap()).unwrap();
        assert_eq!(twice, set);
    }

    #[test]
    fn rotate_four_times_is_identity() {
        let shape = ImageShape::new(4, 6, 3).unwrap();
        let set = ramp_set(2, shape);
        let spec = TaskSpec::new(TaskName::Rotate, Protocol::PairedShuffled, 0);
        let mut cur = set.clone();
        for _ in 0..4 {
            cur = apply_task(&spec, &cur).unwrap();
        }
        assert_eq!(cur, set);
        assert_eq!(
            spec.output_shape(shape).unwrap(),
            ImageShape::new(6, 4, 3).unwrap()
        );
    }

    #[test]
    fn rotate_left_moves_top_right_to_top_left() {
        let shape = ImageShape::new(2, 3, 1).unwrap();
        // [[1 2 3], [4 5 6]] rotated left is [[3 6], [2 5], [1 4]].
        let img = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(rotate_left(&img, shape), vec![3.0, 6.0, 2.0, 5.0, 1.0, 4.0]);
    }

    #[test]
    fn constant_image_has_no_edges() {
        let shape = ImageShape::new(5, 5, 3).unwrap();
        assert!(sobel_edges(&[0.7; 75], shape).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sobel_of_a_step_peaks_at_the_edge() {
        let shape = ImageShape::new(3, 4, 1).unwrap();
        let img = [0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0];
        let e = sobel_edges(&img, shape);
        assert_eq!(e[1], 1.0);
        assert_eq!(e[2], 1.0);
        assert_eq!(e[0], 0.0);
        assert_eq!(e[3], 0.0);
    }

    #[test]
    fn grayscale_weights() {
        let g = grayscale(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        assert!((g[0] - 0.299).abs() < 1e-15 && (g[1] - 0.587).abs() < 1e-15);
        assert!((g[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_mask_is_a_centered_quarter() {
        let shape = ImageShape::new(32, 32, 1).unwrap();
        let m = MaskRect::centered_quarter(shape);
        assert_eq!((m.top, m.left, m.height, m.width), (8, 8, 16, 16));
        let out = zero_mask(&[1.0; 1024], shape, m);
        assert_eq!(out.iter().filter(|&&v| v == 0.0).count(), 256);
    }

    #[test]
    fn downsample_block_average() {
        let shape = ImageShape::new(2, 4, 1).unwrap();
        let img = [0.0, 1.0, 0.5, 0.5, 1.0, 0.0, 0.25, 0.75];
        assert_eq!(downsample(&img, shape, 2), vec![0.5, 0.5]);
    }

    #[test]
    fn invalid_params_rejected() {
        let gray = ImageShape::new(8, 8, 1).unwrap();
        let spec = TaskSpec::new(TaskName::Colorize, Protocol::PairedShuffled, 0);
        assert!(spec.validate(gray).is_err());
        let mut sr = TaskSpec::new(TaskName::SuperRes, Protocol::PairedShuffled, 0);
        sr.params.factor = Some(3);
        assert!(sr.validate(gray).is_err());
        let mut ip = TaskSpec::new(TaskName::Inpaint, Protocol::PairedShuffled, 0);
        ip.params.mask = Some(MaskRect {
            top: 6,
            left: 0,
            height: 4,
            width: 2,
        });
        assert!(ip.validate(gray).is_err());
        ip.params.mask = Some(MaskRect {
            top: 0,
            left: 0,
            height: 0,
            width: 2,
        });
        assert!(ip.validate(gray).is_err());
        assert!("sharpen".parse::<TaskName>().is_err());
        assert_eq!(
            "edges-to-real".parse::<TaskName>().unwrap(),
            TaskName::EdgesToReal
        );
    }

    #[test]
    fn paired_shuffled_inverse() {
        let shape = ImageShape::new(4, 4, 1).unwrap();
        let source = ramp_set(100, shape);
        let spec = TaskSpec::new(TaskName::Vflip, Protocol::PairedShuffled, 5);
        let pair = make_domain_pair(&spec, &source).unwrap();
        assert_eq!((pair.a.len(), pair.b.len()), (100, 100));
        let PairingRecord::Permutation(perm) = &pair.record else {
            panic!()
        };
        for (i, &j) in perm.iter().enumerate() {
            assert_eq!(vflip(&pair.a.image(i), shape), pair.b.image(j));
        }
        assert!(pair.a.ids()[0].starts_with("a00000") && pair.a.ids()[0].ends_with(".png"));
        assert_eq!(pair.correspondence().unwrap().len(), 100);
    }

    #[test]
    fn nonmatching_halves_are_disjoint() {
        let shape = ImageShape::new(4, 4, 1).unwrap();
        let source = ramp_set(11, shape);
        let spec = TaskSpec::new(TaskName::Inpaint, Protocol::Nonmatching, 2);
        let pair = make_domain_pair(&spec, &source).unwrap();
        assert!(pair.a.ids().iter().all(|id| !pair.b.ids().contains(id)));
        assert_eq!(pair.a.len() + pair.b.len(), 11);
        assert!(pair.correspondence().is_none());
    }
}
