use image::{Rgb, RgbImage};

use super::{AnnotationError, BoundingBox, RegionMask};

/// Anisotropy `|λ1 − λ2| / (λ1 + λ2)` below which a mask has no usable
/// major axis.
pub const ISOTROPY_THRESHOLD: f64 = 1e-3;

/// Centroid and second central moments of a mask's set pixels.
///
/// The centroid is in pixel indices (`cx` = column, `cy` = row). The moments
/// use a y-up frame (`y = -row`), so angles read counter-clockwise on screen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskMoments {
    pub count: usize,
    pub cx: f64,
    pub cy: f64,
    pub mu20: f64,
    pub mu02: f64,
    pub mu11: f64,
}

impl MaskMoments {
    pub fn of(mask: &RegionMask) -> Option<Self> {
        let mut n = 0usize;
        let (mut sx, mut sy) = (0.0, 0.0);
        for (c, r) in mask.set_pixels() {
            n += 1;
            sx += c as f64;
            sy += r as f64;
        }
        if n == 0 {
            return None;
        }
        let cx = sx / n as f64;
        let cy = sy / n as f64;
        let (mut mu20, mut mu02, mut mu11) = (0.0, 0.0, 0.0);
        for (c, r) in mask.set_pixels() {
            let dx = c as f64 - cx;
            let dy = -(r as f64 - cy);
            mu20 += dx * dx;
            mu02 += dy * dy;
            mu11 += dx * dy;
        }
        let n = n as f64;
        Some(Self {
            count: n as usize,
            cx,
            cy,
            mu20: mu20 / n,
            mu02: mu02 / n,
            mu11: mu11 / n,
        })
    }

    /// Eigenvalues of the covariance matrix, largest first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.mu20 + self.mu02);
        let half_diff = 0.5 * (self.mu20 - self.mu02);
        let root = (half_diff * half_diff + self.mu11 * self.mu11).sqrt();
        (mean + root, mean - root)
    }

    /// `|λ1 − λ2| / (λ1 + λ2)`; zero for a single pixel.
    pub fn anisotropy(&self) -> f64 {
        let (l1, l2) = self.eigenvalues();
        if l1 + l2 <= 0.0 {
            0.0
        } else {
            (l1 - l2).abs() / (l1 + l2)
        }
    }

    /// Major-axis angle from the X-axis in degrees, in `(-90, 90]`.
    pub fn angle_deg(&self) -> f64 {
        let mut angle = 0.5 * (2.0 * self.mu11).atan2(self.mu20 - self.mu02).to_degrees();
        if angle <= -90.0 {
            angle += 180.0;
        }
        angle
    }
}

/// Angle of the mask's major principal axis from the X-axis, in `(-90, 90]`.
pub fn major_axis_angle(mask: &RegionMask) -> Result<f64, AnnotationError> {
    let moments = MaskMoments::of(mask).ok_or(AnnotationError::EmptyMask)?;
    let anisotropy = moments.anisotropy();
    if anisotropy < ISOTROPY_THRESHOLD {
        return Err(AnnotationError::IsotropicMask { anisotropy });
    }
    Ok(moments.angle_deg())
}

/// A region rotated so its major axis is vertical and cropped to a
/// patch-aligned box.
#[derive(Debug, Clone)]
pub struct NormalizedRegion {
    pub image: RgbImage,
    pub mask: RegionMask,
    /// Counter-clockwise rotation applied about the mask centroid.
    pub rotation_deg: f64,
    /// Crop window in the rotated frame; `width()`/`height()` equal the
    /// output extents.
    pub bbox: BoundingBox,
    /// Set when the mask had no usable major axis and was passed through
    /// unrotated.
    pub isotropic: bool,
}

/// Mirror index without repeating the edge sample: `-1 → 1`, `n → n-2`.
pub fn reflect_index(i: i64, n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    if m >= n as i64 {
        (period - m) as usize
    } else {
        m as usize
    }
}

fn bilinear(image: &RgbImage, x: f64, y: f64) -> Rgb<u8> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let px = |dx: i64, dy: i64| {
        *image.get_pixel(
            reflect_index(x0 + dx, w) as u32,
            reflect_index(y0 + dy, h) as u32,
        )
    };
    let (p00, p10, p01, p11) = (px(0, 0), px(1, 0), px(0, 1), px(1, 1));
    let mut out = [0u8; 3];
    for ch in 0..3 {
        let top = p00[ch] as f64 * (1.0 - fx) + p10[ch] as f64 * fx;
        let bottom = p01[ch] as f64 * (1.0 - fx) + p11[ch] as f64 * fx;
        let v = top * (1.0 - fy) + bottom * fy;
        out[ch] = v.round().clamp(0.0, 255.0) as u8;
    }
    Rgb(out)
}

/// Rotation about a fixed centre in pixel-index coordinates. Positive angles
/// are counter-clockwise on screen.
#[derive(Debug, Clone, Copy)]
struct Rotation {
    cx: f64,
    cy: f64,
    cos: f64,
    sin: f64,
}

impl Rotation {
    fn new(cx: f64, cy: f64, degrees: f64) -> Self {
        let (sin, cos) = degrees.to_radians().sin_cos();
        Self { cx, cy, cos, sin }
    }

    fn forward(&self, col: f64, row: f64) -> (f64, f64) {
        let dx = col - self.cx;
        let dy = self.cy - row;
        let rx = dx * self.cos - dy * self.sin;
        let ry = dx * self.sin + dy * self.cos;
        (self.cx + rx, self.cy - ry)
    }

    fn inverse(&self, col: f64, row: f64) -> (f64, f64) {
        let dx = col - self.cx;
        let dy = self.cy - row;
        let rx = dx * self.cos + dy * self.sin;
        let ry = -dx * self.sin + dy * self.cos;
        (self.cx + rx, self.cy - ry)
    }
}

fn round_up(len: i64, side: i64) -> i64 {
    ((len + side - 1) / side).max(1) * side
}

/// Rotates image and mask so the mask's major axis becomes vertical, then
/// crops to the rotated mask's box grown to a multiple of `patch_side`.
///
/// The rotation is `90 − M` folded into `(-90, 90]`; both choices leave the
/// axis vertical. Image samples are bilinear with mirror padding outside the
/// source; mask samples are nearest-neighbour and empty outside the source.
pub fn normalize_rotation(
    image: &RgbImage,
    mask: &RegionMask,
    patch_side: usize,
) -> Result<NormalizedRegion, AnnotationError> {
    assert!(patch_side > 0, "patch side must be positive");
    if image.width() as usize != mask.width() || image.height() as usize != mask.height() {
        return Err(AnnotationError::ShapeMismatch {
            image_w: image.width() as usize,
            image_h: image.height() as usize,
            mask_w: mask.width(),
            mask_h: mask.height(),
        });
    }
    let moments = MaskMoments::of(mask).ok_or(AnnotationError::EmptyMask)?;
    let isotropic = moments.anisotropy() < ISOTROPY_THRESHOLD;
    let rotation_deg = if isotropic {
        0.0
    } else {
        let r = 90.0 - moments.angle_deg();
        if r > 90.0 {
            r - 180.0
        } else {
            r
        }
    };
    let rot = Rotation::new(moments.cx, moments.cy, rotation_deg);

    let sample_mask = |u: i64, v: i64| -> bool {
        let (sx, sy) = rot.inverse(u as f64, v as f64);
        let (c, r) = (sx.round(), sy.round());
        c >= 0.0
            && r >= 0.0
            && (c as usize) < mask.width()
            && (r as usize) < mask.height()
            && mask.get(c as usize, r as usize)
    };

    // Candidate window: the rotated source occupancy box, with a pixel of slack.
    let occupied = mask.occupied_box().ok_or(AnnotationError::EmptyMask)?;
    let corners = [
        (occupied.min_x as f64 - 0.5, occupied.min_y as f64 - 0.5),
        (occupied.max_x as f64 + 0.5, occupied.min_y as f64 - 0.5),
        (occupied.min_x as f64 - 0.5, occupied.max_y as f64 + 0.5),
        (occupied.max_x as f64 + 0.5, occupied.max_y as f64 + 0.5),
    ];
    let (mut lo_u, mut lo_v, mut hi_u, mut hi_v) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    for (c, r) in corners {
        let (u, v) = rot.forward(c, r);
        lo_u = lo_u.min(u);
        lo_v = lo_v.min(v);
        hi_u = hi_u.max(u);
        hi_v = hi_v.max(v);
    }
    let mut tight: Option<BoundingBox> = None;
    for v in (lo_v.floor() as i64 - 1)..=(hi_v.ceil() as i64 + 1) {
        for u in (lo_u.floor() as i64 - 1)..=(hi_u.ceil() as i64 + 1) {
            if sample_mask(u, v) {
                let b = tight.get_or_insert(BoundingBox {
                    min_x: u,
                    min_y: v,
                    max_x: u,
                    max_y: v,
                });
                b.min_x = b.min_x.min(u);
                b.min_y = b.min_y.min(v);
                b.max_x = b.max_x.max(u);
                b.max_y = b.max_y.max(v);
            }
        }
    }
    let tight = tight.ok_or(AnnotationError::EmptyMask)?;

    let side = patch_side as i64;
    let w = tight.max_x - tight.min_x + 1;
    let h = tight.max_y - tight.min_y + 1;
    let out_w = round_up(w, side);
    let out_h = round_up(h, side);
    let u0 = tight.min_x - (out_w - w) / 2;
    let v0 = tight.min_y - (out_h - h) / 2;

    let out_image = RgbImage::from_fn(out_w as u32, out_h as u32, |i, j| {
        let (sx, sy) = rot.inverse((u0 + i as i64) as f64, (v0 + j as i64) as f64);
        bilinear(image, sx, sy)
    });
    let out_mask = RegionMask::from_fn(out_w as usize, out_h as usize, |i, j| {
        sample_mask(u0 + i as i64, v0 + j as i64)
    });

    Ok(NormalizedRegion {
        image: out_image,
        mask: out_mask,
        rotation_deg,
        bbox: BoundingBox {
            min_x: u0,
            min_y: v0,
            max_x: u0 + out_w,
            max_y: v0 + out_h,
        },
        isotropic,
    })
}
