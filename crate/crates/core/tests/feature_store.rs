use std::collections::BTreeMap;

use anyloc::feature_store::{Dataset, ManifestEntry, FEATURE_HEADER_LEN};
use anyloc::{
    read_feature_map, write_feature_map, DatasetManifest, DescriptorSet, Error, FeatureMap, FeatureSource, GtMode,
};
use proptest::prelude::*;

fn le_map(h: u32, w: u32, d: u32, values: &[f32]) -> Vec<u8> {
    let mut bytes = b"ANYLFEAT".to_vec();
    for x in [1, h, w, d] {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

#[test]
fn reads_hand_written_little_endian_files() {
    let values: Vec<f32> = (0..12).map(|i| i as f32 * 0.5 - 2.0).collect();
    let bytes = le_map(2, 3, 2, &values);
    let map = read_feature_map(bytes.as_slice(), "img").unwrap();
    assert_eq!((map.height(), map.width(), map.dim()), (2, 3, 2));
    assert_eq!(map.pixel_at(1, 2), &values[10..12]);
    let mut out = Vec::new();
    write_feature_map(&map, &mut out).unwrap();
    assert_eq!(out, bytes);
}

#[test]
fn rejects_malformed_files() {
    let good = le_map(1, 2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let check = |bytes: &[u8], format: bool| {
        let err = read_feature_map(bytes, "x").unwrap_err();
        if format {
            assert!(matches!(err, Error::Format(_) | Error::Validation(_)), "{err}");
        } else {
            assert!(matches!(err, Error::Length { .. } | Error::Format(_)), "{err}");
        }
        assert_eq!(err.exit_code(), 1);
    };
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    check(&bad_magic, true);
    let mut bad_version = good.clone();
    bad_version[8] = 2;
    check(&bad_version, true);
    check(&good[..good.len() - 1], false);
    check(&[good.as_slice(), &[0, 0, 0, 0]].concat(), false);
    check(&good[..FEATURE_HEADER_LEN - 2], false);
    check(&le_map(0, 2, 2, &[]), true);
    check(&le_map(1, 1, 1, &[f32::NAN]), true);
}

#[test]
fn manifests_round_trip_through_toml() {
    let text = r#"
version = 1
name = "corridor"
gt_mode = "metric"
radius = 2.5

[[entries]]
image_id = "d0"
role = "database"
position = [0.0, 0.0]

[[entries]]
image_id = "d1"
role = "database"
position = [10.0, 0.0]

[[entries]]
image_id = "q0"
role = "query"
position = [1.5, 2.0]
"#;
    let m = DatasetManifest::from_toml_str(text).unwrap();
    assert_eq!(m.positives("q0"), ["d0"]);
    assert!(!m.is_positive("q0", "d1"));
    let again = DatasetManifest::from_toml_str(&m.to_toml_string()).unwrap();
    assert_eq!(again.entries(), m.entries());
    assert_eq!(again.radius(), 2.5);

    let missing_position = text.replace("position = [1.5, 2.0]", "");
    assert!(DatasetManifest::from_toml_str(&missing_position).is_err());
    let duplicate = text.replace("\"d1\"", "\"d0\"");
    assert!(DatasetManifest::from_toml_str(&duplicate).is_err());
}

#[test]
fn ground_truth_modes() {
    let frame = vec![
        ManifestEntry::database("a").with_frame(0),
        ManifestEntry::database("b").with_frame(5),
        ManifestEntry::query("q").with_frame(3),
    ];
    let m = DatasetManifest::new("f", GtMode::Frame, 2.0, frame.clone(), BTreeMap::new()).unwrap();
    assert_eq!(m.positives("q"), ["b"]);
    let no_frames = vec![ManifestEntry::database("a"), ManifestEntry::query("q")];
    assert!(DatasetManifest::new("f", GtMode::Frame, 2.0, no_frames, BTreeMap::new()).is_err());

    let entries = vec![
        ManifestEntry::database("a"),
        ManifestEntry::database("b"),
        ManifestEntry::query("q"),
    ];
    let gt = BTreeMap::from([("q".to_string(), vec!["b".to_string()])]);
    let m = DatasetManifest::new("e", GtMode::Explicit, 1.0, entries.clone(), gt).unwrap();
    assert_eq!(m.positives("q"), ["b"]);
    let bad = BTreeMap::from([("q".to_string(), vec!["nope".to_string()])]);
    assert!(DatasetManifest::new("e", GtMode::Explicit, 1.0, entries, bad).is_err());
}

#[test]
fn dataset_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let entries = vec![
        ManifestEntry::database("d0").with_frame(0),
        ManifestEntry::query("q0").with_frame(0),
    ];
    let manifest = DatasetManifest::new("tiny", GtMode::Frame, 1.0, entries, BTreeMap::new()).unwrap();
    let maps = vec![
        FeatureMap::new("d0", 1, 2, 3, vec![1.0; 6]).unwrap(),
        FeatureMap::new("q0", 1, 2, 3, vec![2.0; 6]).unwrap(),
    ];
    Dataset::create(tmp.path(), &manifest, maps.clone()).unwrap();
    assert!(tmp.path().join("d0.anyf").is_file());
    let ds = Dataset::open(tmp.path()).unwrap();
    assert_eq!(ds.manifest.name(), "tiny");
    assert_eq!(ds.features.load("q0").unwrap(), maps[1]);
    let err = ds.features.load("missing").unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("missing.anyf"));
}

#[test]
fn descriptor_sets() {
    let mut set = DescriptorSet::new("gem-p3", 2, None).unwrap();
    set.push("a", &[1.0, 0.0]).unwrap();
    set.push("b", &[0.0, 1.0]).unwrap();
    assert!(set.push("a", &[1.0, 1.0]).is_err());
    assert!(set.push("c", &[1.0]).is_err());
    let mut bytes = Vec::new();
    set.write(&mut bytes).unwrap();
    assert_eq!(DescriptorSet::read(bytes.as_slice()).unwrap(), set);
    assert_eq!(set.subset(["b"]).unwrap().ids(), ["b"]);
    assert!(set.subset(["z"]).is_err());
    assert!(DescriptorSet::new("vlad-hard", 4, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn feature_maps_round_trip(h in 1usize..6, w in 1usize..6, d in 1usize..9, seed in any::<u32>()) {
        let data: Vec<f32> = (0..h * w * d).map(|i| ((i as u32).wrapping_mul(seed | 1) % 1000) as f32 / 7.0 - 50.0).collect();
        let map = FeatureMap::new("m", h, w, d, data).unwrap();
        let mut bytes = Vec::new();
        write_feature_map(&map, &mut bytes).unwrap();
        prop_assert_eq!(bytes.len(), FEATURE_HEADER_LEN + 4 * h * w * d);
        prop_assert_eq!(read_feature_map(bytes.as_slice(), "m").unwrap(), map);
    }
}
