//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes   "LINUDT01"
//! header_len   u32
//! header       header_len bytes of UTF-8 JSON
//! arrays       f32 values, one blob per manifest entry, in manifest order
//! ```
//!
//! The header holds the fit configuration, per-basis and map metadata, and the
//! array manifest (name, shape, byte offset into the array region, byte length,
//! CRC32). Matrices are stored row-major. Offsets and lengths tile the array
//! region exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use lintra_core::linalg::single_precision_tolerance;
use lintra_core::pca::PcaBasis;
use lintra_core::{FitConfig, ImageShape, LatentMap, MapMode, Translator};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LINUDT01";
const MAGIC_PREFIX: &[u8; 6] = b"LINUDT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisMeta {
    pub shape: ImageShape,
    pub rank: usize,
    pub total_variance: f64,
    pub skew_aligned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub rank: usize,
    pub mode: MapMode,
    pub iterations_run: usize,
    pub buddy_counts: Vec<usize>,
    pub deltas: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub length: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub created: u64,
    pub config: FitConfig,
    pub basis_a: BasisMeta,
    pub basis_b: BasisMeta,
    pub map: MapMeta,
    pub arrays: Vec<ArrayEntry>,
}

fn basis_meta(b: &PcaBasis) -> BasisMeta {
    BasisMeta {
        shape: b.shape(),
        rank: b.rank(),
        total_variance: b.total_variance(),
        skew_aligned: b.skew_aligned(),
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter()
        .flat_map(|r| r.iter().copied().collect::<Vec<_>>())
        .collect()
}

struct Blobs {
    entries: Vec<ArrayEntry>,
    bytes: Vec<u8>,
}

impl Blobs {
    fn push(&mut self, name: &str, shape: &[usize], values: &[f64]) {
        let start = self.bytes.len();
        for &v in values {
            self.bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let blob = &self.bytes[start..];
        self.entries.push(ArrayEntry {
            name: name.to_owned(),
            shape: shape.to_vec(),
            offset: start as u64,
            length: blob.len() as u64,
            crc32: crc32fast::hash(blob),
        });
    }
}

/// Serializes `t` to the container layout. Identical translators give identical bytes.
pub fn to_bytes(t: &Translator) -> Result<Vec<u8>> {
    let mut blobs = Blobs {
        entries: Vec::new(),
        bytes: Vec::new(),
    };
    for (tag, b) in [("a", t.basis_a()), ("b", t.basis_b())] {
        let (d, r) = (b.dim(), b.rank());
        blobs.push(&format!("basis_{tag}.mean"), &[d], b.mean().as_slice());
        blobs.push(
            &format!("basis_{tag}.components"),
            &[d, r],
            &matrix_rows(b.components()),
        );
        blobs.push(
            &format!("basis_{tag}.eigenvalues"),
            &[r],
            b.eigenvalues().as_slice(),
        );
    }
    let map = t.map();
    let r = map.rank();
    blobs.push("map.q", &[r, r], &matrix_rows(&map.q));

    let header = Header {
        version: FORMAT_VERSION,
        created: t.created(),
        config: *t.config(),
        basis_a: basis_meta(t.basis_a()),
        basis_b: basis_meta(t.basis_b()),
        map: MapMeta {
            rank: r,
            mode: map.mode,
            iterations_run: map.iterations_run,
            buddy_counts: map.buddy_counts.clone(),
            deltas: map.deltas.clone(),
            converged: map.converged,
        },
        arrays: blobs.entries,
    };
    let json = serde_json::to_vec(&header).map_err(|source| Error::Json {
        context: "model header".into(),
        source,
    })?;
    let header_len =
        u32::try_from(json.len()).map_err(|_| Error::Header("header too large".into()))?;
    let mut out = Vec::with_capacity(12 + json.len() + blobs.bytes.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blobs.bytes);
    Ok(out)
}

/// Writes the model atomically: a temporary file in the target directory is
/// renamed over `path`.
pub fn save(t: &Translator, path: &Path) -> Result<()> {
    let bytes = to_bytes(t)?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Translator> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Reads just the JSON header.
pub fn read_header(bytes: &[u8]) -> Result<(Header, usize)> {
    if bytes.len() < 8 || &bytes[..6] != MAGIC_PREFIX {
        return Err(Error::BadMagic);
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::VersionMismatch {
            expected: String::from_utf8_lossy(MAGIC).into_owned(),
            found: String::from_utf8_lossy(&bytes[..8]).into_owned(),
        });
    }
    if bytes.len() < 12 {
        return Err(Error::Length("missing header length".into()));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let start = 12usize;
    let end = start
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Length(format!("header of {header_len} bytes exceeds the file")))?;
    let header: Header =
        serde_json::from_slice(&bytes[start..end]).map_err(|source| Error::Json {
            context: "model header".into(),
            source,
        })?;
    if header.version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION.to_string(),
            found: header.version.to_string(),
        });
    }
    Ok((header, end))
}

fn take(header: &Header, region: &[u8], name: &str, shape: &[usize]) -> Result<Vec<f64>> {
    let entry = header
        .arrays
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::Header(format!("array `{name}` missing")))?;
    if entry.shape != shape {
        return Err(Error::Header(format!(
            "array `{name}` has shape {:?}, expected {shape:?}",
            entry.shape
        )));
    }
    let count: usize = shape.iter().product();
    if entry.length != 4 * count as u64 {
        return Err(Error::Length(format!(
            "array `{name}` declares {} bytes",
            entry.length
        )));
    }
    let (off, len) = (entry.offset as usize, entry.length as usize);
    let blob = &region[off..off + len];
    if crc32fast::hash(blob) != entry.crc32 {
        return Err(Error::Checksum(name.to_owned()));
    }
    Ok(blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect())
}

fn check_tiling(header: &Header, region_len: usize) -> Result<()> {
    let mut expected = 0u64;
    for e in &header.arrays {
        if e.offset != expected {
            return Err(Error::Length(format!(
                "array `{}` starts at {}, expected {expected}",
                e.name, e.offset
            )));
        }
        expected = e
            .offset
            .checked_add(e.length)
            .ok_or_else(|| Error::Length("overflow".into()))?;
    }
    if expected != region_len as u64 {
        return Err(Error::Length(format!(
            "arrays declare {expected} bytes, file holds {region_len}"
        )));
    }
    Ok(())
}

fn read_basis(header: &Header, region: &[u8], tag: &str, meta: &BasisMeta) -> Result<PcaBasis> {
    let (d, r) = (meta.shape.dim(), meta.rank);
    let mean = take(header, region, &format!("basis_{tag}.mean"), &[d])?;
    let comps = take(header, region, &format!("basis_{tag}.components"), &[d, r])?;
    let eig = take(header, region, &format!("basis_{tag}.eigenvalues"), &[r])?;
    Ok(PcaBasis::from_parts(
        meta.shape,
        DVector::from_vec(mean),
        DMatrix::from_row_slice(d, r, &comps),
        DVector::from_vec(eig),
        meta.total_variance,
        meta.skew_aligned,
        single_precision_tolerance(r),
    )?)
}

/// Parses a model, re-validating every invariant (orthonormal bases, orthogonal
/// `Q` in orthogonal mode, agreeing ranks).
pub fn from_bytes(bytes: &[u8]) -> Result<Translator> {
    let (header, end) = read_header(bytes)?;
    let region = &bytes[end..];
    check_tiling(&header, region.len())?;
    let basis_a = read_basis(&header, region, "a", &header.basis_a)?;
    let basis_b = read_basis(&header, region, "b", &header.basis_b)?;
    let r = header.map.rank;
    let q = take(&header, region, "map.q", &[r, r])?;
    let map = LatentMap {
        q: DMatrix::from_row_slice(r, r, &q),
        mode: header.map.mode,
        iterations_run: header.map.iterations_run,
        buddy_counts: header.map.buddy_counts.clone(),
        deltas: header.map.deltas.clone(),
        converged: header.map.converged,
    };
    Ok(Translator::new(
        basis_a,
        basis_b,
        map,
        header.created,
        header.config,
    )?)
}
