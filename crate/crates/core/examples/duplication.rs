//! Duplicating every training point and splitting its mass leaves the
//! exact distance unchanged.

use lava::dataset::duplicate_concat;
use lava::synthetic::GaussianBlobs;
use lava::{dataset_distance, HybridCostConfig};

fn main() -> lava::Result<()> {
    let blobs = GaussianBlobs { classes: 3, dim: 4, per_class: 8, separation: 3.0, spread: 1.0 };
    let train = blobs.generate(0)?;
    let valid = blobs.generate(1)?;
    let cfg = HybridCostConfig::oracle();
    let base = dataset_distance(&train, &valid, &cfg)?.distance;
    println!("k = 1: {base:.12}");
    for k in [2, 3, 5] {
        let d = dataset_distance(&duplicate_concat(&train, k)?, &valid, &cfg)?.distance;
        println!("k = {k}: {d:.12}  (change {:.1e})", d - base);
    }
    Ok(())
}
