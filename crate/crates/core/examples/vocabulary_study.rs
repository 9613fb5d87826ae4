//! Which features should a VLAD vocabulary come from? Compares map-specific,
//! in-domain and out-of-domain vocabularies on one target, then a full
//! source x target transfer matrix.
//!
//!     cargo run --example vocabulary_study

use anyloc::aggregation::Assignment;
use anyloc::experiments::{vocabulary_source_study, vocabulary_transfer, Benchmark, VocabCandidate, VocabScope};
use anyloc::retrieval::EvalOptions;
use anyloc::synthetic::{planted_dataset, PlantedConfig};
use anyloc::vocabulary::VocabAssembly;

fn bench(name: &str, domain_seed: u64, seed: u64) -> anyloc::Result<Benchmark> {
    let cfg = PlantedConfig {
        name: name.into(),
        pairs: 32,
        pixel_noise: 1.5,
        query_noise: 0.8,
        domain_seed,
        seed,
        ..PlantedConfig::default()
    };
    let data = planted_dataset(&cfg)?;
    Ok(Benchmark::new(data.manifest.clone(), data.features()))
}

pub fn run() -> anyloc::Result<()> {
    // two datasets share a domain, the third does not
    let target = bench("mall", 1, 10)?;
    let sibling = bench("gardens", 1, 11)?;
    let stranger = bench("caverns", 2, 12)?;

    let k = 8;
    let candidates = vec![
        VocabCandidate::map_specific(&target, k),
        VocabCandidate::new(VocabScope::DomainSpecific, VocabAssembly::new(vec![sibling.part(1)], k)),
        VocabCandidate::new(VocabScope::Unstructured, VocabAssembly::new(vec![stranger.part(1)], k)),
        VocabCandidate::new(
            VocabScope::Global,
            VocabAssembly::new(vec![target.part(2), sibling.part(2), stranger.part(2)], k),
        ),
    ];
    let options = EvalOptions::default();
    let table = vocabulary_source_study(&target, &candidates, Assignment::Hard, 42, &options)?;
    print!("{}", table.to_table());

    let matrix = vocabulary_transfer(&[target, sibling, stranger], k, Assignment::Hard, 42, 1, &options)?;
    print!("{}", matrix.to_table());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code().into());
    }
}
