//! Patch grids, scanning orders and tiling.

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::reflect_index;

pub const DEFAULT_PATCH_SIDE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub rows: usize,
    pub cols: usize,
}

impl GridDims {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "grid needs at least one cell");
        Self { rows, cols }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }
}

/// Order in which the patch grid of a region is visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanStrategy {
    /// Row-major raster: every row left to right.
    Scan1,
    /// Serpentine: even rows left to right, odd rows right to left.
    Scan2,
    /// 2×2 blocks, block rows traversed serpentine.
    Scan3,
}

impl ScanStrategy {
    pub const ALL: [ScanStrategy; 3] = [ScanStrategy::Scan1, ScanStrategy::Scan2, ScanStrategy::Scan3];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScanStrategy::Scan1 => "scan1",
            ScanStrategy::Scan2 => "scan2",
            ScanStrategy::Scan3 => "scan3",
        }
    }
}

impl fmt::Display for ScanStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScanStrategy {
    type Err = ScanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "").as_str() {
            "scan1" => Ok(ScanStrategy::Scan1),
            "scan2" => Ok(ScanStrategy::Scan2),
            "scan3" => Ok(ScanStrategy::Scan3),
            _ => Err(ScanError::UnknownStrategy(s.to_string())),
        }
    }
}

/// A visit order over a grid: `visits[k]` is the `(row, col)` of the k-th patch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanOrder {
    pub dims: GridDims,
    pub strategy: ScanStrategy,
    pub visits: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Patch {
    pub pixels: RgbImage,
    pub grid_pos: (usize, usize),
    pub sequence_pos: usize,
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("unknown scan strategy {0:?} (expected scan1, scan2 or scan3)")]
    UnknownStrategy(String),
    #[error("image is empty")]
    EmptyImage,
    #[error("scan order is for a {expected_rows}x{expected_cols} grid but the image gives {rows}x{cols}")]
    GridMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
}

/// Number of patch rows and columns needed to cover an image.
pub fn grid_dims(height: usize, width: usize, patch_side: usize) -> GridDims {
    assert!(height >= 1 && width >= 1 && patch_side >= 1);
    GridDims::new(height.div_ceil(patch_side), width.div_ceil(patch_side))
}

pub fn scan_order(dims: GridDims, strategy: ScanStrategy) -> ScanOrder {
    let GridDims { rows, cols } = dims;
    let mut visits = Vec::with_capacity(rows * cols);
    match strategy {
        ScanStrategy::Scan1 => {
            for r in 0..rows {
                visits.extend((0..cols).map(|c| (r, c)));
            }
        }
        ScanStrategy::Scan2 => {
            for r in 0..rows {
                if r % 2 == 0 {
                    visits.extend((0..cols).map(|c| (r, c)));
                } else {
                    visits.extend((0..cols).rev().map(|c| (r, c)));
                }
            }
        }
        ScanStrategy::Scan3 => {
            let block_rows = rows.div_ceil(2);
            let block_cols = cols.div_ceil(2);
            for br in 0..block_rows {
                let leftward = br % 2 == 1;
                let row_span: Vec<usize> = (2 * br..(2 * br + 2).min(rows)).collect();
                for k in 0..block_cols {
                    let bc = if leftward { block_cols - 1 - k } else { k };
                    let mut col_span: Vec<usize> = (2 * bc..(2 * bc + 2).min(cols)).collect();
                    if leftward {
                        col_span.reverse();
                    }
                    for &r in &row_span {
                        visits.extend(col_span.iter().map(|&c| (r, c)));
                    }
                }
            }
        }
    }
    ScanOrder {
        dims,
        strategy,
        visits,
    }
}

/// Mean Manhattan distance between consecutive visits; 0 for a single cell.
pub fn continuity_cost(order: &ScanOrder) -> f64 {
    if order.visits.len() < 2 {
        return 0.0;
    }
    let total: usize = order
        .visits
        .windows(2)
        .map(|w| w[0].0.abs_diff(w[1].0) + w[0].1.abs_diff(w[1].1))
        .sum();
    total as f64 / (order.visits.len() - 1) as f64
}

/// Cuts one `side × side` patch whose top-left pixel is `(x0, y0)`, mirroring
/// indices that fall outside the image.
pub fn cut_patch(image: &RgbImage, x0: usize, y0: usize, side: usize) -> RgbImage {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if x0 + side <= w && y0 + side <= h {
        return image::imageops::crop_imm(image, x0 as u32, y0 as u32, side as u32, side as u32)
            .to_image();
    }
    RgbImage::from_fn(side as u32, side as u32, |i, j| {
        let c = reflect_index((x0 + i as usize) as i64, w);
        let r = reflect_index((y0 + j as usize) as i64, h);
        *image.get_pixel(c as u32, r as u32)
    })
}

/// Cuts the image into patches, emitted in the order's visit sequence.
pub fn tile_region(
    image: &RgbImage,
    order: &ScanOrder,
    patch_side: usize,
) -> Result<Vec<Patch>, ScanError> {
    if image.width() == 0 || image.height() == 0 {
        return Err(ScanError::EmptyImage);
    }
    let dims = grid_dims(image.height() as usize, image.width() as usize, patch_side);
    if dims != order.dims {
        return Err(ScanError::GridMismatch {
            expected_rows: order.dims.rows,
            expected_cols: order.dims.cols,
            rows: dims.rows,
            cols: dims.cols,
        });
    }
    Ok(order
        .visits
        .par_iter()
        .enumerate()
        .map(|(k, &(r, c))| Patch {
            pixels: cut_patch(image, c * patch_side, r * patch_side, patch_side),
            grid_pos: (r, c),
            sequence_pos: k,
        })
        .collect())
}
