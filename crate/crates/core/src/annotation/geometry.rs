use super::{AnnotationError, BoundingBox, RegionMask, RegionRecord, Vertex};

/// Absolute shoelace area.
pub fn polygon_area(vertices: &[Vertex]) -> f64 {
    if vertices.len() < 3 {
        return 0.0;
    }
    let n = vertices.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum();
    twice.abs() / 2.0
}

/// Tight integer hull of the vertices: minima are floored, maxima ceiled.
pub fn region_bounding_box(record: &RegionRecord) -> BoundingBox {
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for v in &record.coordinates {
        min_x = min_x.min(v.x);
        min_y = min_y.min(v.y);
        max_x = max_x.max(v.x);
        max_y = max_y.max(v.y);
    }
    BoundingBox {
        min_x: min_x.floor() as i64,
        min_y: min_y.floor() as i64,
        max_x: max_x.ceil() as i64,
        max_y: max_y.ceil() as i64,
    }
}

/// Whether `(px, py)` lies on the closed segment `a`–`b`.
pub fn point_on_segment(px: f64, py: f64, a: Vertex, b: Vertex) -> bool {
    let cross = (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
    cross == 0.0
        && px >= a.x.min(b.x)
        && px <= a.x.max(b.x)
        && py >= a.y.min(b.y)
        && py <= a.y.max(b.y)
}

/// Fills the region polygon into a mask covering `bbox`.
///
/// Mask pixel `(col, row)` has its centre at
/// `(bbox.min_x + col + 0.5, bbox.min_y + row + 0.5)`. A pixel is set when the
/// centre is inside by the even-odd rule or lies exactly on an edge.
pub fn rasterize_mask(
    record: &RegionRecord,
    bbox: &BoundingBox,
) -> Result<RegionMask, AnnotationError> {
    let width = bbox.width().max(0) as usize;
    let height = bbox.height().max(0) as usize;
    let mut mask = RegionMask::new(width, height);
    let verts = &record.coordinates;
    let n = verts.len();
    if n < 3 || width == 0 || height == 0 || polygon_area(verts) == 0.0 {
        return Err(AnnotationError::EmptyMask);
    }
    let ox = bbox.min_x as f64;
    let oy = bbox.min_y as f64;

    let mut crossings: Vec<f64> = Vec::with_capacity(n);
    for row in 0..height {
        let yc = oy + row as f64 + 0.5;

        crossings.clear();
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            if (a.y > yc) != (b.y > yc) {
                crossings.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        crossings.sort_by(f64::total_cmp);
        for span in crossings.chunks_exact(2) {
            // Centres strictly inside the span; centres on the crossing are
            // handled by the edge pass below.
            let first = ((span[0] - ox - 0.5).floor() + 1.0).max(0.0);
            let last = (span[1] - ox - 0.5).ceil() - 1.0;
            if last < first {
                continue;
            }
            let last = (last as usize).min(width - 1);
            for col in first as usize..=last {
                mask.set(col, row, true);
            }
        }

        // Boundary pass: centres lying exactly on an edge.
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            if yc < a.y.min(b.y) || yc > a.y.max(b.y) {
                continue;
            }
            let (lo, hi) = if a.y == b.y {
                (a.x.min(b.x), a.x.max(b.x))
            } else {
                let x = a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y);
                (x - 1.0, x + 1.0)
            };
            let first = (lo - ox - 0.5).ceil().max(0.0);
            let last = (hi - ox - 0.5).floor();
            if last < first {
                continue;
            }
            let last = (last as usize).min(width - 1);
            for col in first as usize..=last {
                let xc = ox + col as f64 + 0.5;
                if point_on_segment(xc, yc, a, b) {
                    mask.set(col, row, true);
                }
            }
        }
    }
    if mask.is_empty() {
        return Err(AnnotationError::EmptyMask);
    }
    Ok(mask)
}
