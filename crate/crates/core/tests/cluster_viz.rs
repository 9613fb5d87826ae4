use std::sync::Arc;

use anyloc::aggregation::{vlad, VladConfig};
use anyloc::cluster_viz::{
    assign_map, assign_map_with, encode_png, export_label_image, montage, render, Palette, DEFAULT_PALETTE,
};
use anyloc::vocabulary::Vocabulary;
use anyloc::FeatureMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn setup(seed: u64, h: usize, w: usize, d: usize, k: usize) -> (FeatureMap, Vocabulary) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..h * w * d).map(|_| rng.sample(StandardNormal)).collect();
    let centers = (0..k * d).map(|_| rng.sample(StandardNormal)).collect();
    (
        FeatureMap::new("img", h, w, d, data).unwrap(),
        Vocabulary::new(centers, k, d, 42, Vec::new()).unwrap(),
    )
}

#[test]
fn labels_are_nearest_centers() {
    for seed in 0..10 {
        let (map, vocab) = setup(seed, 5, 7, 6, 8);
        let amap = assign_map(&map, &vocab).unwrap();
        assert_eq!((amap.height, amap.width, amap.k), (5, 7, 8));
        for r in 0..5 {
            for c in 0..7 {
                let px = map.pixel_at(r, c);
                let d2 = |j: usize| -> f64 {
                    px.iter()
                        .zip(vocab.center(j))
                        .map(|(a, b)| ((a - b) as f64).powi(2))
                        .sum()
                };
                let best = (0..8).min_by(|&a, &b| d2(a).total_cmp(&d2(b))).unwrap();
                assert_eq!(amap.label(r, c) as usize, best);
            }
        }
        assert_eq!(amap.histogram().iter().sum::<usize>(), 35);
    }
}

#[test]
fn labels_are_what_hard_vlad_accumulates() {
    // zeroing every cluster that received no pixel must leave VLAD unchanged
    let (map, vocab) = setup(3, 4, 4, 5, 6);
    let amap = assign_map(&map, &vocab).unwrap();
    let g = vlad(&map, &VladConfig::hard(Arc::new(vocab))).unwrap();
    for (j, &count) in amap.histogram().iter().enumerate() {
        if count == 0 {
            assert!(g.values[j * 5..(j + 1) * 5].iter().all(|&x| x == 0.0));
        }
    }
}

#[test]
fn normalized_assignment_uses_unit_features() {
    let vocab = Vocabulary::new(vec![1.0, 0.0, 5.0, 0.0], 2, 2, 42, Vec::new()).unwrap();
    let map = FeatureMap::new("m", 1, 1, 2, vec![4.0, 0.0]).unwrap();
    assert_eq!(assign_map(&map, &vocab).unwrap().labels, [1]);
    assert_eq!(assign_map_with(&map, &vocab, true).unwrap().labels, [0]);
}

#[test]
fn png_round_trip() {
    let (map, vocab) = setup(5, 3, 4, 3, 8);
    let amap = assign_map(&map, &vocab).unwrap();
    let palette = Palette::default();
    let img = render(&amap, &palette, 5).unwrap();
    assert_eq!(img.dimensions(), (20, 15));
    let bytes = encode_png(&img).unwrap();
    let decoded = image::load_from_memory(&bytes).unwrap().to_rgb8();
    assert_eq!(decoded, img);
    for r in 0..3 {
        for c in 0..4 {
            let want = DEFAULT_PALETTE[amap.label(r, c) as usize];
            for (dy, dx) in [(0, 0), (4, 4), (2, 3)] {
                assert_eq!(decoded.get_pixel(c as u32 * 5 + dx, r as u32 * 5 + dy).0, want);
            }
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.png");
    export_label_image(&amap, &palette, 2, &path).unwrap();
    let from_disk = image::open(&path).unwrap().to_rgb8();
    assert_eq!(from_disk.dimensions(), (8, 6));

    let m = montage(&[&amap, &amap], &palette, 1, 2).unwrap();
    assert_eq!(m.dimensions(), (4 + 2 + 4, 3));
}

#[test]
fn palettes() {
    assert_eq!(Palette::default().len(), 8);
    let big = Palette::for_clusters(20);
    assert_eq!(big.len(), 20);
    assert_eq!(&big.0[..8], &DEFAULT_PALETTE[..]);
    let p = Palette::parse("ff0000,00ff00").unwrap();
    assert_eq!(p.0, [[255, 0, 0], [0, 255, 0]]);
    assert!(Palette::parse("zz0000").is_err());

    let (map, vocab) = setup(6, 2, 2, 2, 8);
    let amap = assign_map(&map, &vocab).unwrap();
    assert!(render(&amap, &p, 1).is_err());
}
