use std::collections::HashSet;

use image::{Rgb, RgbImage};
use proptest::prelude::*;
use regionseq::scan::{
    continuity_cost, grid_dims, scan_order, tile_region, GridDims, ScanStrategy,
};

fn manhattan(a: (usize, usize), b: (usize, usize)) -> usize {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

// Block-by-block enumeration of the 2x2 scan, written out directly.
fn scan3_oracle(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let block_cols: Vec<usize> = (0..cols).step_by(2).collect();
    for (br, r0) in (0..rows).step_by(2).enumerate() {
        let rs: Vec<usize> = (r0..(r0 + 2).min(rows)).collect();
        let forward = br % 2 == 0;
        let blocks: Vec<usize> = if forward {
            block_cols.clone()
        } else {
            block_cols.iter().rev().copied().collect()
        };
        for c0 in blocks {
            let mut cs: Vec<usize> = (c0..(c0 + 2).min(cols)).collect();
            if !forward {
                cs.reverse();
            }
            for &r in &rs {
                for &c in &cs {
                    out.push((r, c));
                }
            }
        }
    }
    out
}

#[test]
fn every_grid_up_to_twelve() {
    for rows in 1..=12 {
        for cols in 1..=12 {
            let dims = GridDims::new(rows, cols);
            for strategy in ScanStrategy::ALL {
                let order = scan_order(dims, strategy);
                let set: HashSet<_> = order.visits.iter().copied().collect();
                assert_eq!(order.visits.len(), rows * cols);
                assert_eq!(set.len(), rows * cols);
                assert!(order.visits.iter().all(|&(r, c)| r < rows && c < cols));
            }
            let s1 = scan_order(dims, ScanStrategy::Scan1);
            let s2 = scan_order(dims, ScanStrategy::Scan2);
            assert!(s2.visits.windows(2).all(|w| manhattan(w[0], w[1]) == 1));
            let long_steps: Vec<usize> = s1
                .visits
                .windows(2)
                .map(|w| manhattan(w[0], w[1]))
                .filter(|&d| d != 1)
                .collect();
            if cols >= 2 {
                assert_eq!(long_steps, vec![cols; rows - 1]);
                assert!(continuity_cost(&s2) <= continuity_cost(&s1));
            } else {
                assert!(long_steps.is_empty());
            }
            assert_eq!(scan_order(dims, ScanStrategy::Scan3).visits, scan3_oracle(rows, cols));
        }
    }
}

#[test]
fn four_by_four_block_scan() {
    let order = scan_order(GridDims::new(4, 4), ScanStrategy::Scan3);
    assert_eq!(order.visits, scan3_oracle(4, 4));
    assert_eq!(
        &order.visits[..8],
        &[(0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (0, 3), (1, 2), (1, 3)]
    );
    assert_eq!(&order.visits[8..12], &[(2, 3), (2, 2), (3, 3), (3, 2)]);
}

// Reflection without repeating the edge sample, for indices up to 2(n-1).
fn mirror(i: usize, n: usize) -> usize {
    if i < n {
        i
    } else {
        2 * (n - 1) - i
    }
}

#[test]
fn three_hundred_square_mirror_tiling() {
    let img = RgbImage::from_fn(300, 300, |x, y| Rgb([(x % 256) as u8, (y % 256) as u8, ((x + y) % 7) as u8]));
    let order = scan_order(grid_dims(300, 300, 256), ScanStrategy::Scan1);
    let patches = tile_region(&img, &order, 256).unwrap();
    assert_eq!(patches.len(), 4);
    let br = &patches[3];
    assert_eq!(br.grid_pos, (1, 1));
    for j in 0..256u32 {
        for i in 0..256u32 {
            let sx = mirror(256 + i as usize, 300) as u32;
            let sy = mirror(256 + j as usize, 300) as u32;
            assert_eq!(br.pixels.get_pixel(i, j), img.get_pixel(sx, sy), "({i},{j})");
        }
    }
    // column 44 of the patch (image column 300) mirrors image column 298
    assert_eq!(br.pixels.get_pixel(44, 0), img.get_pixel(298, 256));
}

#[test]
fn exact_tiling_of_aligned_image() {
    let img = RgbImage::from_fn(512, 512, |x, y| Rgb([(x / 3) as u8, (y / 3) as u8, 1]));
    let order = scan_order(grid_dims(512, 512, 256), ScanStrategy::Scan1);
    let patches = tile_region(&img, &order, 256).unwrap();
    assert_eq!(patches.len(), 4);
    for (x, y, p) in patches[0].pixels.enumerate_pixels() {
        assert_eq!(p, img.get_pixel(x, y));
    }
}

proptest! {
    #[test]
    fn patches_follow_visit_order(
        h in 1u32..90,
        w in 1u32..90,
        side in 8usize..40,
        strategy in prop::sample::select(ScanStrategy::ALL.to_vec()),
    ) {
        let img = RgbImage::from_fn(w, h, |x, y| Rgb([x as u8, y as u8, 0]));
        let order = scan_order(grid_dims(h as usize, w as usize, side), strategy);
        let patches = tile_region(&img, &order, side).unwrap();
        prop_assert_eq!(patches.len(), order.dims.rows * order.dims.cols);
        for (k, p) in patches.iter().enumerate() {
            prop_assert_eq!(p.sequence_pos, k);
            prop_assert_eq!(p.grid_pos, order.visits[k]);
            prop_assert_eq!(p.pixels.dimensions(), (side as u32, side as u32));
            let (r, c) = p.grid_pos;
            // the top-left pixel of every patch lies inside the image
            prop_assert_eq!(p.pixels.get_pixel(0, 0), img.get_pixel((c * side) as u32, (r * side) as u32));
        }
    }
}
