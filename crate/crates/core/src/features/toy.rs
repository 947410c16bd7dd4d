use image::RgbImage;

use super::FeatureExtractor;

/// Block-statistics extractor standing in for a pretrained CNN.
///
/// The patch is split into a `grid × grid` block partition; for every block
/// (row-major) and channel (R, G, B) it emits the mean divided by 255 and
/// the population standard deviation divided by 128. With the default
/// 4×4 grid, D = 96.
#[derive(Debug, Clone, Copy)]
pub struct ToyExtractor {
    grid: usize,
}

impl Default for ToyExtractor {
    fn default() -> Self {
        Self { grid: 4 }
    }
}

impl ToyExtractor {
    pub fn with_grid(grid: usize) -> Self {
        assert!(grid >= 1);
        Self { grid }
    }
}

impl FeatureExtractor for ToyExtractor {
    fn name(&self) -> &str {
        "toy"
    }

    fn dim(&self) -> usize {
        self.grid * self.grid * 3 * 2
    }

    fn extract(&self, patch: &RgbImage) -> Vec<f64> {
        let (w, h) = (patch.width() as usize, patch.height() as usize);
        let mut out = Vec::with_capacity(self.dim());
        for by in 0..self.grid {
            let (y0, y1) = (by * h / self.grid, (by + 1) * h / self.grid);
            for bx in 0..self.grid {
                let (x0, x1) = (bx * w / self.grid, (bx + 1) * w / self.grid);
                let mut sum = [0.0f64; 3];
                let mut sq = [0.0f64; 3];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let px = patch.get_pixel(x as u32, y as u32);
                        for ch in 0..3 {
                            let v = px[ch] as f64;
                            sum[ch] += v;
                            sq[ch] += v * v;
                        }
                    }
                }
                let n = ((y1 - y0) * (x1 - x0)).max(1) as f64;
                for ch in 0..3 {
                    let mean = sum[ch] / n;
                    let var = (sq[ch] / n - mean * mean).max(0.0);
                    out.push(mean / 255.0);
                    out.push(var.sqrt() / 128.0);
                }
            }
        }
        out
    }
}
