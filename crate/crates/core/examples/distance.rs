//! Hierarchical dataset distance between two blob draws, with the label
//! distance table and the effect of the label weight.
//!
//! ```text
//! cargo run --release --example distance
//! ```

use lava::synthetic::GaussianBlobs;
use lava::{dataset_distance, HybridCostConfig};

fn main() -> lava::Result<()> {
    let blobs = GaussianBlobs { classes: 3, dim: 8, per_class: 40, separation: 4.0, spread: 1.0 };
    let train = blobs.generate(1)?;
    let valid = blobs.generate(2)?;

    let result = dataset_distance(&train, &valid, &HybridCostConfig::default())?;
    println!("distance {:.6} (converged {})", result.distance, result.converged());

    let table = &result.table;
    println!("label distances (train rows, valid columns):");
    for a in 0..table.train_labels {
        let row: Vec<String> = (0..table.valid_labels)
            .map(|b| table.get(a, b).map_or("   -   ".into(), |d| format!("{d:7.3}")))
            .collect();
        println!("  {a}: {}", row.join(" "));
    }

    for c_weight in [0.0, 0.5, 2.0] {
        let cfg = HybridCostConfig { c_weight, ..HybridCostConfig::default() };
        println!("c_weight {c_weight:3.1}: {:.6}", dataset_distance(&train, &valid, &cfg)?.distance);
    }
    let exact = dataset_distance(&train, &valid, &HybridCostConfig::oracle())?;
    println!("exact LP:     {:.6}", exact.distance);
    Ok(())
}
