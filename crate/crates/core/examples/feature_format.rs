//! Writes a small dataset directory in the `.anyf` layout the extractor
//! produces, then reads it back and checks it.
//!
//!     cargo run --example feature_format

use std::collections::BTreeMap;

use anyloc::feature_store::{Dataset, ManifestEntry, FEATURE_HEADER_LEN};
use anyloc::{DatasetManifest, FeatureMap, FeatureSource, GtMode};

pub fn run() -> anyloc::Result<()> {
    let dir = std::env::temp_dir().join(format!("anyloc-feature-format-{}", std::process::id()));
    let entries = vec![
        ManifestEntry::database("db_0000").with_position(0.0, 0.0),
        ManifestEntry::database("db_0001").with_position(25.0, 0.0),
        ManifestEntry::query("q_0000").with_position(3.0, 4.0),
    ];
    let manifest = DatasetManifest::new("toy-street", GtMode::Metric, 25.0, entries, BTreeMap::new())?;

    // a 2x3 patch grid of 4-dim features per image
    let maps = manifest.entries().iter().enumerate().map(|(i, e)| {
        let data = (0..2 * 3 * 4).map(|j| (i * 100 + j) as f32 / 10.0).collect();
        FeatureMap::new(&e.image_id, 2, 3, 4, data).expect("valid shape")
    });
    Dataset::create(&dir, &manifest, maps)?;

    let ds = Dataset::open(&dir)?;
    let q = ds.features.load("q_0000")?;
    let size = std::fs::metadata(ds.features.path_for("q_0000"))?.len();
    println!("{}: {} entries", ds.manifest.name(), ds.manifest.entries().len());
    println!(
        "q_0000: {}x{}x{}, {size} bytes ({FEATURE_HEADER_LEN}-byte header)",
        q.height(),
        q.width(),
        q.dim()
    );
    println!("pixel (1, 2) = {:?}", q.pixel_at(1, 2));
    println!("positives of q_0000: {:?}", ds.manifest.positives("q_0000"));

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code().into());
    }
}
