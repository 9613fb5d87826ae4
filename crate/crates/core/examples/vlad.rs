//! Hard and soft VLAD against a hand-made two-word vocabulary.
//!
//!     cargo run --example vlad

use std::sync::Arc;

use anyloc::aggregation::{hard_assignments, vlad, VladConfig};
use anyloc::vocabulary::Vocabulary;
use anyloc::FeatureMap;

pub fn run() -> anyloc::Result<()> {
    let vocab = Arc::new(Vocabulary::new(vec![0.0, 0.0, 10.0, 0.0], 2, 2, 42, Vec::new())?);
    let map = FeatureMap::new("img", 1, 3, 2, vec![1.0, 0.0, 0.0, 1.0, 12.0, 0.0])?;

    println!("assignments {:?}", hard_assignments(&map, &vocab, false)?);
    let hard = vlad(&map, &VladConfig::hard(vocab.clone()))?;
    println!("{:<14} {:?}", hard.method_tag, hard.values);
    for t in [0.01, 1.0, 50.0] {
        let soft = vlad(&map, &VladConfig::soft(vocab.clone(), t))?;
        println!("{:<14} {:?}", soft.method_tag, soft.values);
    }
    let norm: f32 = hard.values.iter().map(|x| x * x).sum::<f32>().sqrt();
    println!("dim {} (K x D), norm {norm:.6}", hard.dim());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code().into());
    }
}
