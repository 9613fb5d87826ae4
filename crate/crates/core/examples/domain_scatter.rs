//! Projects descriptors from three "domains" onto their first two principal
//! components and writes a TSV for plotting.
//!
//!     cargo run --example domain_scatter

use anyloc::aggregation::{aggregate_dataset, PoolingConfig};
use anyloc::projection::{export_domain_scatter, fit_pca};
use anyloc::synthetic::{planted_dataset, PlantedConfig};
use anyloc::DescriptorSet;

pub fn run() -> anyloc::Result<()> {
    let mut sets = Vec::new();
    for (i, label) in ["urban", "indoor", "aerial"].iter().enumerate() {
        let cfg = PlantedConfig {
            name: label.to_string(),
            pairs: 20,
            modes: 4,
            domain_seed: 10 + i as u64,
            seed: i as u64,
            ..PlantedConfig::default()
        };
        let data = planted_dataset(&cfg)?;
        sets.push((
            *label,
            aggregate_dataset(data.database_maps().to_vec(), &PoolingConfig::gap().into())?,
        ));
    }

    let mut joint = DescriptorSet::new("gap", sets[0].1.dim(), None)?;
    for (label, set) in &sets {
        for (id, v) in set.iter() {
            joint.push(format!("{label}/{id}"), v)?;
        }
    }
    let model = fit_pca(&joint, 2, false)?;
    let refs: Vec<(&str, &DescriptorSet)> = sets.iter().map(|(l, s)| (*l, s)).collect();
    let table = export_domain_scatter(&model, &refs)?;

    for (label, _) in &sets {
        let rows: Vec<_> = table.rows.iter().filter(|r| r.label == *label).collect();
        let cx = rows.iter().map(|r| r.x).sum::<f64>() / rows.len() as f64;
        let cy = rows.iter().map(|r| r.y).sum::<f64>() / rows.len() as f64;
        println!("{label:<7} centroid ({cx:+.3}, {cy:+.3})");
    }
    let path = std::env::temp_dir().join(format!("anyloc-scatter-{}.tsv", std::process::id()));
    std::fs::write(&path, table.to_tsv())?;
    println!("{} rows written to {}", table.rows.len(), path.display());
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
