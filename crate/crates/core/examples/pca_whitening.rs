//! Fits PCA with whitening on database descriptors and projects queries
//! with the same model.
//!
//!     cargo run --example pca_whitening

use anyloc::aggregation::{aggregate_dataset, PoolingConfig};
use anyloc::projection::{fit_pca, project, project_with, PcaModel};
use anyloc::synthetic::{planted_dataset, PlantedConfig};

pub fn run() -> anyloc::Result<()> {
    let data = planted_dataset(&PlantedConfig {
        pairs: 60,
        ..PlantedConfig::default()
    })?;
    let method = PoolingConfig::gem(3.0).into();
    let db = aggregate_dataset(data.database_maps().to_vec(), &method)?;
    let queries = aggregate_dataset(data.query_maps().to_vec(), &method)?;

    let model = fit_pca(&db, 8, true)?;
    let explained: f64 = model.explained_variance_ratio().iter().sum();
    println!(
        "{} -> {} dims, explained variance {explained:.3}",
        model.input_dim(),
        model.output_dim()
    );
    println!("eigenvalues {:.4?}", model.eigenvalues());

    let raw = project_with(&model, &db, false)?;
    let n = raw.len() as f64;
    let variances: Vec<f64> = (0..raw.dim())
        .map(|r| raw.vectors().map(|v| (v[r] as f64).powi(2)).sum::<f64>() / (n - 1.0))
        .collect();
    println!("whitened training variances {variances:.4?}");

    let projected = project(&model, &queries)?;
    println!(
        "queries: {} x {} ({})",
        projected.len(),
        projected.dim(),
        projected.method_tag()
    );

    let mut bytes = Vec::new();
    model.write(&mut bytes)?;
    println!(
        "model file {} bytes, round trip equal: {}",
        bytes.len(),
        PcaModel::read(bytes.as_slice())? == model
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code().into());
    }
}
