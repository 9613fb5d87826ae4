//! End-to-end retrieval on a planted dataset: aggregate, rank, score, and
//! compare against a shuffled ground truth.
//!
//!     cargo run --example retrieval

use anyloc::aggregation::PoolingConfig;
use anyloc::retrieval::{evaluate, DescriptorCache, EvalOptions};
use anyloc::synthetic::{planted_dataset, shuffled_ground_truth, PlantedConfig};

pub fn run() -> anyloc::Result<()> {
    let data = planted_dataset(&PlantedConfig {
        pairs: 50,
        ..PlantedConfig::default()
    })?;
    let features = data.features();
    let method = PoolingConfig::gem(3.0).into();
    let options = EvalOptions::default();
    let cache = DescriptorCache::in_memory();

    let eval = evaluate(&data.manifest, &features, &method, &options, Some(&cache))?;
    print!("{}", eval.report.to_table());
    let first = &eval.report.per_query[0];
    println!("{} -> {:?}", first.query_id, &first.ranked[..3]);

    let shuffled = shuffled_ground_truth(&data.manifest, 7)?;
    let chance = evaluate(&shuffled, &features, &method, &options, Some(&cache))?;
    println!(
        "shuffled ground truth R@1 {:.3}",
        chance.report.recall_at(1).unwrap_or(0.0)
    );
    println!("cache: {} hits, {} misses", cache.hits(), cache.misses());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code().into());
    }
}
