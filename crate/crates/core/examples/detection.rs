//! Corrupts a clean draw, values it, and reports how many corrupted points
//! fall among the lowest-valued ones. Removing those points should bring
//! the training set closer to the validation set.
//!
//! ```text
//! cargo run --release --example detection -- [fraction] [seed]
//! ```

use lava::corruption;
use lava::detect::{
    default_budgets, detection_curve, distance_after_removal, random_baseline_rate, value_dataset,
};
use lava::synthetic::GaussianBlobs;
use lava::{CorruptionRecord, HybridCostConfig, LabeledDataset};

fn report(name: &str, train: &LabeledDataset, valid: &LabeledDataset, record: &CorruptionRecord) -> lava::Result<()> {
    let cfg = HybridCostConfig::default();
    let (_, values) = value_dataset(train, valid, &cfg)?;
    let budgets = default_budgets(train.len());
    let curve = detection_curve(&values, record, &budgets)?;
    println!("{name}: {} corrupted of {}", record.corrupted_indices.len(), train.len());
    for (b, r) in curve.budgets.iter().zip(&curve.rates) {
        println!("  inspect {b:>4}: found {:5.1}%  (random {:5.1}%)", 100.0 * r, 100.0 * random_baseline_rate(*b, train.len()).min(1.0));
    }
    let count = record.corrupted_indices.len();
    let d = distance_after_removal(train, valid, &values, &[0, count], &cfg)?;
    println!("  distance {:.4} -> {:.4} after dropping the {count} lowest", d[0], d[1]);
    Ok(())
}

fn main() -> lava::Result<()> {
    let mut args = std::env::args().skip(1);
    let fraction: f64 = args.next().map_or(0.2, |s| s.parse().expect("fraction"));
    let seed: u64 = args.next().map_or(3, |s| s.parse().expect("seed"));

    let blobs = GaussianBlobs { classes: 5, dim: 10, per_class: 40, separation: 4.0, spread: 0.5 };
    let clean = blobs.generate(seed)?;
    let valid = blobs.generate(seed + 1)?;

    let (train, record) = corruption::mislabel(&clean, fraction, seed + 2)?;
    report("mislabel", &train, &valid, &record)?;
    let (train, record) = corruption::feature_noise(&clean, fraction, 1.0, seed + 2)?;
    report("feature noise", &train, &valid, &record)?;
    let (train, record) = corruption::backdoor_trigger(&clean, fraction, 0, &[0, 1, 2], 6.0, seed + 2)?;
    report("backdoor", &train, &valid, &record)?;
    Ok(())
}
