//! Raster input/output: PNG, and raw interleaved 8-bit RGB with a sidecar
//! `<file>.dims` text file holding `width height`.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use thiserror::Error;

use crate::annotation::{reflect_index, BoundingBox};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: String,
        source: image::ImageError,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".dims");
    PathBuf::from(s)
}

fn is_raw(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("rgb") | Some("raw")
    )
}

pub fn load_rgb(path: &Path) -> Result<RgbImage, RasterError> {
    let display = || path.display().to_string();
    if !is_raw(path) {
        return image::open(path)
            .map(|img| img.to_rgb8())
            .map_err(|source| RasterError::Image {
                path: display(),
                source,
            });
    }
    let dims_path = sidecar(path);
    let dims = fs::read_to_string(&dims_path).map_err(|source| RasterError::Io {
        path: dims_path.display().to_string(),
        source,
    })?;
    let nums: Vec<u32> = dims
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| RasterError::Format {
            path: dims_path.display().to_string(),
            message: "expected `width height`".into(),
        })?;
    let [w, h] = nums[..] else {
        return Err(RasterError::Format {
            path: dims_path.display().to_string(),
            message: "expected `width height`".into(),
        });
    };
    let bytes = fs::read(path).map_err(|source| RasterError::Io {
        path: display(),
        source,
    })?;
    let expected = w as usize * h as usize * 3;
    if bytes.len() != expected {
        return Err(RasterError::Format {
            path: display(),
            message: format!("{} bytes, expected {expected} for {w}x{h} RGB", bytes.len()),
        });
    }
    Ok(RgbImage::from_raw(w, h, bytes).expect("length checked"))
}

/// Writes PNG, or raw RGB plus sidecar when the extension is `.rgb`/`.raw`.
pub fn save_rgb(image: &RgbImage, path: &Path) -> Result<(), RasterError> {
    if is_raw(path) {
        let dims_path = sidecar(path);
        fs::write(&dims_path, format!("{} {}\n", image.width(), image.height())).map_err(
            |source| RasterError::Io {
                path: dims_path.display().to_string(),
                source,
            },
        )?;
        return fs::write(path, image.as_raw()).map_err(|source| RasterError::Io {
            path: path.display().to_string(),
            source,
        });
    }
    image.save(path).map_err(|source| RasterError::Image {
        path: path.display().to_string(),
        source,
    })
}

/// Copies the `bbox` window (half-open in both axes) out of `image`,
/// mirroring any part that falls outside.
pub fn crop_window(image: &RgbImage, bbox: &BoundingBox) -> RgbImage {
    let (w, h) = (image.width() as usize, image.height() as usize);
    RgbImage::from_fn(bbox.width().max(0) as u32, bbox.height().max(0) as u32, |i, j| {
        let c = reflect_index(bbox.min_x + i as i64, w);
        let r = reflect_index(bbox.min_y + j as i64, h);
        *image.get_pixel(c as u32, r as u32)
    })
}
