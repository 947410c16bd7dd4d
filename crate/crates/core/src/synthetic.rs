//! Seeded synthetic data: feature-sequence datasets and small annotated
//! slides for exercising the pipeline without real tissue images.

use std::collections::BTreeMap;

use image::{Rgb, RgbImage};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::annotation::{rasterize_mask, region_bounding_box, RegionRecord, Vertex};
use crate::features::FeatureSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDatasetSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    /// Inclusive range of sequence lengths.
    pub min_len: usize,
    pub max_len: usize,
    /// Standard deviation of the per-entry Gaussian noise.
    pub noise: f64,
    /// When set, only the first this-many columns sit around the class
    /// centroid; later columns are class-independent background.
    pub signal_columns: Option<usize>,
    pub seed: u64,
}

impl Default for SequenceDatasetSpec {
    fn default() -> Self {
        Self {
            classes: 3,
            dim: 96,
            per_class: 20,
            min_len: 8,
            max_len: 48,
            noise: 0.5,
            signal_columns: None,
            seed: 0,
        }
    }
}

/// Sequences whose columns scatter around a per-class centroid drawn
/// uniformly from `[0, 1]^D`. Output is interleaved by class.
pub fn centroid_dataset(spec: &SequenceDatasetSpec) -> Vec<FeatureSequence> {
    assert!(spec.min_len >= 1 && spec.min_len <= spec.max_len);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centroids: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..spec.dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let noise = Normal::new(0.0, spec.noise).expect("noise sd must be finite and non-negative");
    let mut out = Vec::with_capacity(spec.classes * spec.per_class);
    for i in 0..spec.per_class {
        for (c, centroid) in centroids.iter().enumerate() {
            let m = rng.random_range(spec.min_len..=spec.max_len);
            let signal = spec.signal_columns.unwrap_or(m);
            let features = Array2::from_shape_fn((spec.dim, m), |(d, t)| {
                let base = if t < signal { centroid[d] } else { 0.5 };
                base + noise.sample(&mut rng)
            });
            out.push(FeatureSequence::new(features, c, format!("syn-{c}-{i:03}")));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideSpec {
    pub classes: Vec<String>,
    pub regions_per_class: usize,
    /// Side of the square cell each region is drawn in.
    pub cell: u32,
    pub cells_per_row: u32,
    pub seed: u64,
}

impl Default for SlideSpec {
    fn default() -> Self {
        Self {
            classes: vec!["Benign".into(), "InSitu".into(), "Invasive".into()],
            regions_per_class: 6,
            cell: 320,
            cells_per_row: 6,
            seed: 0,
        }
    }
}

fn class_texture(class: usize, x: u32, y: u32, jitter: i32) -> Rgb<u8> {
    let stripe = match class % 3 {
        0 => (x / 6).is_multiple_of(2),
        1 => ((x + y) / 9).is_multiple_of(2),
        _ => (y / 4).is_multiple_of(2),
    };
    let base: [i32; 3] = match class % 4 {
        0 => [200, 120, 170],
        1 => [120, 60, 150],
        2 => [90, 40, 110],
        _ => [170, 90, 90],
    };
    let lift = if stripe { 40 } else { -20 };
    let ch = |v: i32| (v + lift + jitter).clamp(0, 255) as u8;
    Rgb([ch(base[0]), ch(base[1]), ch(base[2])])
}

/// A light background with elongated, randomly oriented elliptical regions,
/// each filled with a class-specific striped texture. Returns the slide and
/// the matching region records (ids from 0, labels from `classes`).
pub fn synthetic_slide(spec: &SlideSpec) -> (RgbImage, Vec<RegionRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.classes.len() * spec.regions_per_class;
    let rows = (total as u32).div_ceil(spec.cells_per_row).max(1);
    let width = spec.cells_per_row * spec.cell;
    let height = rows * spec.cell;
    let mut image = RgbImage::from_fn(width, height, |x, y| {
        let n = ((x * 7 + y * 13) % 11) as u8;
        Rgb([236 + n / 2, 222 + n / 3, 230 + n / 2])
    });

    let mut regions = Vec::with_capacity(total);
    for k in 0..total {
        let class = k % spec.classes.len();
        let cx0 = (k as u32 % spec.cells_per_row) * spec.cell;
        let cy0 = (k as u32 / spec.cells_per_row) * spec.cell;
        let half = spec.cell as f64 / 2.0;
        let (cx, cy) = (cx0 as f64 + half, cy0 as f64 + half);
        let major = half * rng.random_range(0.7..0.9);
        let minor = major * rng.random_range(0.35..0.55);
        let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let (s, c) = theta.sin_cos();
        let coords: Vec<Vertex> = (0..24)
            .map(|i| {
                let a = i as f64 / 24.0 * std::f64::consts::TAU;
                let (ex, ey) = (major * a.cos(), minor * a.sin());
                let x = cx + ex * c - ey * s;
                let y = cy - (ex * s + ey * c);
                Vertex::new((x * 100.0).round() / 100.0, (y * 100.0).round() / 100.0)
            })
            .collect();
        let mut metadata = BTreeMap::new();
        metadata.insert("Type".to_string(), "Polygon".to_string());
        let record = RegionRecord::new(k as i64, spec.classes[class].clone(), coords, metadata);

        let bbox = region_bounding_box(&record);
        let mask = rasterize_mask(&record, &bbox).expect("synthetic region is non-degenerate");
        for (col, row) in mask.set_pixels() {
            let x = (bbox.min_x + col as i64) as u32;
            let y = (bbox.min_y + row as i64) as u32;
            if x < width && y < height {
                let jitter = rng.random_range(-12..=12);
                image.put_pixel(x, y, class_texture(class, x, y, jitter));
            }
        }
        regions.push(record);
    }
    (image, regions)
}
