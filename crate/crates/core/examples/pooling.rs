//! GAP, GMP and GeM on one feature map. Without the final normalization the
//! three are ordered GAP <= GeM <= GMP on non-negative features.
//!
//!     cargo run --example pooling

use anyloc::aggregation::{pool, PoolingConfig};
use anyloc::FeatureMap;

pub fn run() -> anyloc::Result<()> {
    let map = FeatureMap::new(
        "img",
        2,
        2,
        3,
        vec![
            0.0, 1.0, 4.0, //
            1.0, 1.0, 0.0, //
            2.0, 1.0, 0.0, //
            5.0, 1.0, 0.0,
        ],
    )?;
    for cfg in [PoolingConfig::gap(), PoolingConfig::gem(3.0), PoolingConfig::gmp()] {
        let raw = pool(&map, &cfg.unnormalized())?;
        let unit = pool(&map, &cfg)?;
        println!(
            "{:<7} raw {:?}  normalized {:?}",
            unit.method_tag, raw.values, unit.values
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code().into());
    }
}
