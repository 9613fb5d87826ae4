//! Evaluates precomputed global descriptors, such as CLS tokens saved by the
//! extractor, without any aggregation.
//!
//!     cargo run --example cls_passthrough

use anyloc::retrieval::{evaluate_descriptors, EvalOptions};
use anyloc::synthetic::{planted_dataset, PlantedConfig};
use anyloc::DescriptorSet;

pub fn run() -> anyloc::Result<()> {
    let data = planted_dataset(&PlantedConfig {
        pairs: 30,
        ..PlantedConfig::default()
    })?;

    // stand-in for CLS vectors: the first patch token of each map
    let mut cls = DescriptorSet::new("cls", 16, None)?;
    for map in &data.maps {
        cls.push(map.image_id(), map.pixel(0))?;
    }
    let path = std::env::temp_dir().join(format!("anyloc-cls-{}.desc", std::process::id()));
    cls.save(&path)?;

    let loaded = DescriptorSet::load(&path)?;
    let eval = evaluate_descriptors(&data.manifest, &loaded, &EvalOptions::default())?;
    print!("{}", eval.report.to_table());
    std::fs::remove_file(&path)?;
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code().into());
    }
}
