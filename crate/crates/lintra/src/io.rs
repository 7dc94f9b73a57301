//! Image directories: PNG and binary PNM in, same formats out.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, ImageFormat};
use lintra_core::{ImageSet, ImageShape};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

const EXTENSIONS: [&str; 4] = ["png", "ppm", "pgm", "pnm"];

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_image(&path) {
            files.push(path);
        } else {
            log::debug!("skipping {}", path.display());
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn decode(path: &Path) -> Result<(ImageShape, Vec<f64>)> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, raw) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                format: format!("{:?}", other.color()),
            })
        }
    };
    let shape = ImageShape::new(h, w, channels)?;
    Ok((shape, raw.iter().map(|&v| v as f64 / 255.0).collect()))
}

/// Loads every PNG/PPM/PGM/PNM file in `dir` (not recursive), in lexicographic
/// file-name order. Ids are the file names. Files are decoded in parallel.
pub fn load_directory(dir: &Path, expected: Option<ImageShape>) -> Result<ImageSet> {
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(Error::NoImages(dir.to_path_buf()));
    }
    let decoded: Vec<(ImageShape, Vec<f64>)> =
        files.par_iter().map(|p| decode(p)).collect::<Result<_>>()?;
    let shape = expected.unwrap_or(decoded[0].0);
    let mut data = DMatrix::zeros(decoded.len(), shape.dim());
    for (i, (path, (s, pixels))) in files.iter().zip(&decoded).enumerate() {
        if *s != shape {
            return Err(Error::MixedShapes {
                path: path.clone(),
                expected: shape.to_string(),
                found: s.to_string(),
            });
        }
        data.row_mut(i)
            .iter_mut()
            .zip(pixels)
            .for_each(|(d, v)| *d = *v);
    }
    let ids = files
        .iter()
        .map(|p| {
            p.file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    Ok(ImageSet::new(data, shape, ids)?)
}

/// 8-bit code of an intensity: `v * 255` rounded half to even.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

/// Writes each image as `dir/<id>`, creating `dir` if needed. The format follows
/// the id's extension; ids without a known extension get `.png` appended.
pub fn write_directory(set: &ImageSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let shape = set.shape();
    let color = if shape.channels == 1 {
        ColorType::L8
    } else {
        ColorType::Rgb8
    };
    (0..set.len()).into_par_iter().try_for_each(|i| {
        let id = &set.ids()[i];
        let mut path = dir.join(id);
        if !is_image(&path) {
            path = dir.join(format!("{id}.png"));
        }
        let format = ImageFormat::from_path(&path).unwrap_or(ImageFormat::Png);
        let bytes: Vec<u8> = set.data().row(i).iter().map(|&v| quantize(v)).collect();
        image::save_buffer_with_format(
            &path,
            &bytes,
            shape.width as u32,
            shape.height as u32,
            color,
            format,
        )
        .map_err(|source| Error::Image { path, source })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_rounds_half_to_even() {
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.5), 128); // 127.5 -> 128
        assert_eq!(quantize(-1.0), 0);
    }

    #[test]
    fn extension_filter() {
        assert!(is_image(Path::new("a/b.PNG")));
        assert!(is_image(Path::new("x.pgm")));
        assert!(!is_image(Path::new("task.json")));
        assert!(!is_image(Path::new("noext")));
    }
}
