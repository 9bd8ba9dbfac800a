//! Values every training point against a validation draw and lists both
//! ends of the ranking.

use lava::detect::value_dataset;
use lava::synthetic::GaussianBlobs;
use lava::HybridCostConfig;

fn main() -> lava::Result<()> {
    let blobs = GaussianBlobs { classes: 4, dim: 6, per_class: 25, separation: 4.0, spread: 1.0 };
    let train = blobs.generate(7)?;
    let valid = blobs.generate(8)?;
    let (distance, report) = value_dataset(&train, &valid, &HybridCostConfig::default())?;
    println!("distance {distance:.6}, residual {:.1e}", report.provenance.residual);

    println!("lowest-valued points:");
    for &i in &report.ranking_train[..5] {
        println!("  #{i:<3} label {}  value {:+.5}", train.labels()[i], report.values_train[i]);
    }
    println!("highest-valued points:");
    for &i in report.ranking_train.iter().rev().take(5) {
        println!("  #{i:<3} label {}  value {:+.5}", train.labels()[i], report.values_train[i]);
    }
    println!("values sum to {:.1e}", report.values_train.iter().sum::<f64>());
    Ok(())
}
