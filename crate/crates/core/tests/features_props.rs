use image::{Rgb, RgbImage};
use ndarray::Array2;
use proptest::prelude::*;
use regionseq::features::{
    build_sequence, load_feature_manifest, write_feature_manifest, FeatureExtractor,
    FeatureManifest, ToyExtractor,
};
use regionseq::scan::{grid_dims, scan_order, tile_region, ScanStrategy};
use regionseq::FeatureSequence;

fn sorted_columns(seq: &FeatureSequence) -> Vec<Vec<u64>> {
    let mut cols: Vec<Vec<u64>> = (0..seq.len())
        .map(|t| seq.column(t).iter().map(|v| v.to_bits()).collect())
        .collect();
    cols.sort();
    cols
}

fn empty_template() -> FeatureManifest {
    FeatureManifest {
        dim: 0,
        classes: vec!["a".into(), "b".into(), "c".into()],
        extractor: Some("test".into()),
        preprocessing: None,
        strategy: None,
        regions: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scan_orders_give_the_same_column_multiset(
        h in 1u32..100,
        w in 1u32..100,
        seed in 0u8..255,
    ) {
        let img = RgbImage::from_fn(w, h, |x, y| {
            Rgb([(x * 7 + seed as u32) as u8, (y * 13) as u8, ((x ^ y) * 3) as u8])
        });
        let side = 24;
        let ex = ToyExtractor::default();
        let mut reference = None;
        for strategy in ScanStrategy::ALL {
            let order = scan_order(grid_dims(h as usize, w as usize, side), strategy);
            let patches = tile_region(&img, &order, side).unwrap();
            let seq = build_sequence(&patches, &ex, 1, "r").unwrap();
            prop_assert_eq!(seq.len(), order.visits.len());
            prop_assert_eq!(seq.dim(), ex.dim());
            let cols = sorted_columns(&seq);
            match &reference {
                None => reference = Some(cols),
                Some(r) => prop_assert_eq!(r, &cols),
            }
        }
    }

    #[test]
    fn manifest_round_trip_is_bit_exact(
        lens in prop::collection::vec(1usize..30, 1..5),
        dim in 1usize..12,
        raw in prop::collection::vec(-1e6f64..1e6, 400),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let mut k = 0;
        let seqs: Vec<FeatureSequence> = lens
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let features = Array2::from_shape_fn((dim, m), |_| {
                    k += 1;
                    // snap to nine significant digits
                    format!("{:.8e}", raw[k % raw.len()] / (k as f64)).parse().unwrap()
                });
                FeatureSequence::new(features, i % 3, format!("region {i}"))
            })
            .collect();
        let path = dir.path().join("features.json");
        let manifest = write_feature_manifest(&path, &seqs, &empty_template()).unwrap();
        prop_assert_eq!(manifest.dim, dim);
        let loaded = load_feature_manifest(&path).unwrap();
        prop_assert_eq!(loaded.len(), seqs.len());
        for (a, b) in loaded.iter().zip(&seqs) {
            prop_assert_eq!(a.len(), b.len());
            prop_assert_eq!(a.label, b.label);
            prop_assert_eq!(&a.region_id, &b.region_id);
            prop_assert!(a.features.iter().zip(b.features.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn long_region_keeps_every_patch() {
    // 48 patches from a 6x8 grid, no resizing on the way to the sequence
    let img = RgbImage::from_fn(8 * 32, 6 * 32, |x, y| Rgb([x as u8, y as u8, 9]));
    let order = scan_order(grid_dims(6 * 32, 8 * 32, 32), ScanStrategy::Scan2);
    let patches = tile_region(&img, &order, 32).unwrap();
    let seq = build_sequence(&patches, &ToyExtractor::default(), 2, "wsi").unwrap();
    assert_eq!((seq.dim(), seq.len()), (96, 48));
    for (t, p) in patches.iter().enumerate() {
        let direct = ToyExtractor::default().extract(&p.pixels);
        assert!(seq.column(t).iter().zip(&direct).all(|(a, b)| a == b));
    }
}
