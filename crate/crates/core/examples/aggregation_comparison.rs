//! Recall of GAP, GMP, GeM and hard/soft VLAD on the same dataset.
//!
//!     cargo run --example aggregation_comparison

use std::sync::Arc;

use anyloc::experiments::{compare_aggregations, standard_methods, Benchmark};
use anyloc::retrieval::EvalOptions;
use anyloc::synthetic::{planted_dataset, PlantedConfig};
use anyloc::vocabulary::{build_vocabulary, VocabAssembly};

pub fn run() -> anyloc::Result<()> {
    let data = planted_dataset(&PlantedConfig {
        pairs: 64,
        pixel_noise: 1.5,
        query_noise: 0.8,
        ..PlantedConfig::default()
    })?;
    let bench = Benchmark::new(data.manifest.clone(), data.features());
    let vocab = build_vocabulary(&VocabAssembly::new(vec![bench.part(1)], 8), 42)?.vocabulary;
    let table = compare_aggregations(&bench, &standard_methods(Arc::new(vocab)), &EvalOptions::default())?;
    print!("{}", table.to_table());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code().into());
    }
}
