//! Builds an urban vocabulary from three datasets with the preset recipe,
//! saves it and shows that the build is reproducible.
//!
//!     cargo run --example domain_vocabulary

use std::sync::Arc;

use anyloc::synthetic::{planted_dataset, PlantedConfig};
use anyloc::vocabulary::{build_vocabulary, preset, Domain, Vocabulary};
use anyloc::FeatureSource;

pub fn run() -> anyloc::Result<()> {
    let available: Vec<_> = ["Oxford", "St Lucia", "Pitts-30k"]
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let cfg = PlantedConfig {
                name: name.to_string(),
                pairs: 16,
                seed: i as u64,
                ..PlantedConfig::default()
            };
            let data = planted_dataset(&cfg).expect("valid config");
            (
                data.manifest.clone(),
                Arc::new(data.features()) as Arc<dyn FeatureSource + Send>,
            )
        })
        .collect();

    let recipe = preset(Domain::Urban);
    for part in &recipe.parts {
        println!("{}: every {} database image(s)", part.dataset, part.stride);
    }
    let mut assembly = recipe.resolve(&available, 8)?;
    assembly.sample_cap = Some(500);
    let build = build_vocabulary(&assembly, 42)?;
    println!(
        "k={} from {} of {} features, inertia {:.2} after {} iterations",
        build.vocabulary.k(),
        build.clustered_features,
        build.pooled_features,
        build.inertia,
        build.iterations
    );

    let path = std::env::temp_dir().join(format!("anyloc-urban-{}.vocab", std::process::id()));
    build.vocabulary.save(&path)?;
    let again = build_vocabulary(&assembly, 42)?.vocabulary;
    let loaded = Vocabulary::load(&path)?;
    println!("fingerprint {}", loaded.fingerprint());
    println!("rebuild identical: {}", again.fingerprint() == loaded.fingerprint());
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
