//! Renders per-pixel vocabulary assignments as colour-coded PNGs.
//!
//!     cargo run --example cluster_maps

use anyloc::cluster_viz::{assign_map, montage, render, save_png, Palette};
use anyloc::synthetic::{planted_dataset, PlantedConfig};
use anyloc::vocabulary::{build_vocabulary, VocabAssembly, VocabPart};
use std::sync::Arc;

pub fn run() -> anyloc::Result<()> {
    let data = planted_dataset(&PlantedConfig {
        pairs: 8,
        height: 6,
        width: 8,
        ..PlantedConfig::default()
    })?;
    let part = VocabPart::new(data.manifest.clone(), Arc::new(data.features()), 1);
    let vocab = build_vocabulary(&VocabAssembly::new(vec![part], 8), 42)?.vocabulary;

    let palette = Palette::default();
    let maps = data.maps[..3]
        .iter()
        .map(|m| assign_map(m, &vocab))
        .collect::<anyloc::Result<Vec<_>>>()?;
    for amap in &maps {
        println!("{}: cluster histogram {:?}", amap.image_id, amap.histogram());
    }
    let single = render(&maps[0], &palette, 14)?;
    let refs: Vec<_> = maps.iter().collect();
    let strip = montage(&refs, &palette, 14, 6)?;

    let dir = std::env::temp_dir().join(format!("anyloc-clusters-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    save_png(&single, dir.join("db0000.png"))?;
    save_png(&strip, dir.join("montage.png"))?;
    println!(
        "{}x{} and {}x{} images in {}",
        single.width(),
        single.height(),
        strip.width(),
        strip.height(),
        dir.display()
    );
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
