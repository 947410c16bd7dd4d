//! Slide annotation ingest: XML parsing, region geometry and orientation
//! normalization.

mod geometry;
mod orient;
mod xml;

pub use geometry::{polygon_area, rasterize_mask, region_bounding_box};
pub use orient::{
    major_axis_angle, normalize_rotation, reflect_index, MaskMoments, NormalizedRegion,
    ISOTROPY_THRESHOLD,
};
pub use xml::{parse_annotations, write_annotations, SchemaMapping};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single polygon vertex in level-0 pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
}

impl Vertex {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// One annotated region as recorded in the slide's annotation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub region_id: i64,
    pub label: String,
    pub coordinates: Vec<Vertex>,
    /// Polygon area from the shoelace formula.
    pub area_px: f64,
    /// Remaining annotation attributes (zoom ratio, micron lengths, ...).
    pub metadata: BTreeMap<String, String>,
}

impl RegionRecord {
    /// Builds a record and fills `area_px` from the vertices.
    pub fn new(
        region_id: i64,
        label: impl Into<String>,
        coordinates: Vec<Vertex>,
        metadata: BTreeMap<String, String>,
    ) -> Self {
        let area_px = polygon_area(&coordinates);
        Self {
            region_id,
            label: label.into(),
            coordinates,
            area_px,
            metadata,
        }
    }
}

/// Inclusive axis-aligned pixel box. Coordinates may be negative once a
/// region has been rotated into its own frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: i64,
    pub min_y: i64,
    pub max_x: i64,
    pub max_y: i64,
}

impl BoundingBox {
    pub fn width(&self) -> i64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> i64 {
        self.max_y - self.min_y
    }
}

/// Binary raster of a region polygon, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl RegionMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(col, row));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Iterates `(col, row)` of every set pixel in raster order.
    pub fn set_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// Tight box around the set pixels, in mask pixel indices.
    pub fn occupied_box(&self) -> Option<BoundingBox> {
        let mut it = self.set_pixels();
        let (c0, r0) = it.next()?;
        let mut bbox = BoundingBox {
            min_x: c0 as i64,
            min_y: r0 as i64,
            max_x: c0 as i64,
            max_y: r0 as i64,
        };
        for (c, r) in it {
            bbox.min_x = bbox.min_x.min(c as i64);
            bbox.max_x = bbox.max_x.max(c as i64);
            bbox.min_y = bbox.min_y.min(r as i64);
            bbox.max_y = bbox.max_y.max(r as i64);
        }
        Some(bbox)
    }

    /// Grayscale rendering (0 / 255).
    pub fn to_image(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width as u32, self.height as u32, |c, r| {
            image::Luma([if self.get(c as usize, r as usize) { 255 } else { 0 }])
        })
    }

    pub fn from_image(img: &image::GrayImage) -> Self {
        Self::from_fn(img.width() as usize, img.height() as usize, |c, r| {
            img.get_pixel(c as u32, r as u32)[0] >= 128
        })
    }
}

/// Problems attached to a single region. Regions with `TooFewVertices` or
/// `InvalidCoordinate` are dropped; `UnknownLabel` regions are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegionIssue {
    TooFewVertices { region_id: i64, count: usize },
    InvalidCoordinate { region_id: i64, index: usize },
    UnknownLabel { region_id: i64, label: String },
}

impl RegionIssue {
    pub fn region_id(&self) -> i64 {
        match self {
            RegionIssue::TooFewVertices { region_id, .. }
            | RegionIssue::InvalidCoordinate { region_id, .. }
            | RegionIssue::UnknownLabel { region_id, .. } => *region_id,
        }
    }

    /// Whether the region was excluded from the parsed output.
    pub fn is_rejection(&self) -> bool {
        !matches!(self, RegionIssue::UnknownLabel { .. })
    }
}

/// Parsed regions plus the per-region validation report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedAnnotations {
    pub regions: Vec<RegionRecord>,
    pub issues: Vec<RegionIssue>,
}

impl ParsedAnnotations {
    pub fn has_unknown_label(&self, region_id: i64) -> bool {
        self.issues
            .iter()
            .any(|i| matches!(i, RegionIssue::UnknownLabel { region_id: id, .. } if *id == region_id))
    }
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("malformed annotation XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("region polygon encloses no pixel centres")]
    EmptyMask,
    #[error("mask orientation is isotropic (anisotropy {anisotropy:.2e})")]
    IsotropicMask { anisotropy: f64 },
    #[error("image is {image_w}x{image_h} but mask is {mask_w}x{mask_h}")]
    ShapeMismatch {
        image_w: usize,
        image_h: usize,
        mask_w: usize,
        mask_h: usize,
    },
}
