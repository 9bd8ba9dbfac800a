//! Full valuation on two 10,000-point, 32-dimensional, 10-class datasets.
//!
//! ```text
//! cargo run --release --example scale -- [points] [dim] [separation] [spread]
//! ```

use std::time::Instant;

use lava::detect::value_dataset;
use lava::synthetic::GaussianBlobs;
use lava::HybridCostConfig;

fn main() -> lava::Result<()> {
    let mut args = std::env::args().skip(1);
    let points: usize = args.next().map_or(10_000, |s| s.parse().expect("points"));
    let dim: usize = args.next().map_or(32, |s| s.parse().expect("dim"));
    let separation: f64 = args.next().map_or(2.0, |s| s.parse().expect("separation"));
    let spread: f64 = args.next().map_or(0.5, |s| s.parse().expect("spread"));
    let blobs = GaussianBlobs {
        classes: 10,
        dim,
        per_class: points / 10,
        separation,
        spread,
    };
    let train = blobs.generate(1)?;
    let valid = blobs.generate(2)?;

    let start = Instant::now();
    let (distance, report) = value_dataset(&train, &valid, &HybridCostConfig::default())?;
    let elapsed = start.elapsed();
    println!("n = m = {}, d = {dim}", train.len());
    println!("distance      {distance:.6}");
    println!("residual      {:.3e}", report.provenance.residual);
    println!("converged     {}", report.provenance.converged);
    println!("elapsed       {:.2?}", elapsed);
    println!(
        "lowest value  #{} ({:.4})",
        report.ranking_train[0], report.values_train[report.ranking_train[0]]
    );
    Ok(())
}
