//! Distance to clean validation data as the mislabeled fraction grows.
//!
//! ```text
//! cargo run --release --example monotonicity -- [per_class] [seeds]
//! ```

use lava::detect::monotonicity_experiment;
use lava::synthetic::GaussianBlobs;
use lava::HybridCostConfig;

fn main() -> lava::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_class = args.next().map_or(30, |s| s.parse().expect("per_class"));
    let seeds: u64 = args.next().map_or(3, |s| s.parse().expect("seeds"));
    let blobs = GaussianBlobs { classes: 10, dim: 16, per_class, separation: 4.0, spread: 0.5 };
    let fractions = [0.0, 0.02, 0.05, 0.10, 0.15];
    let seeds: Vec<u64> = (0..seeds).collect();
    let table = monotonicity_experiment(&blobs, &fractions, &seeds, &HybridCostConfig::default())?;
    println!("seed  {}", fractions.map(|f| format!("{:>8}", format!("{:.0}%", 100.0 * f))).join(""));
    for ((s, row), ok) in seeds.iter().zip(&table.distances).zip(&table.strictly_increasing) {
        let cells: String = row.iter().map(|d| format!("{d:8.4}")).collect();
        println!("{s:>4}  {cells}  {}", if *ok { "increasing" } else { "NOT increasing" });
    }
    Ok(())
}
