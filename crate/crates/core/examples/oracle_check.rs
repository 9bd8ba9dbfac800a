//! Cross-checks exact, log-barrier and entropic duals on generated fixtures.
//!
//! ```text
//! cargo run --example oracle_check -- [size] [fixtures] [seed]
//! ```

use lava::oracle::{run_oracle_checks, OracleConfig};

fn main() -> lava::Result<()> {
    let mut args = std::env::args().skip(1);
    let size = args.next().map_or(6, |s| s.parse().expect("size"));
    let fixtures = args.next().map_or(5, |s| s.parse().expect("fixtures"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    let report = run_oracle_checks(&OracleConfig { size, fixtures, seed, ..Default::default() })?;

    let worst_gap = report
        .gap
        .iter()
        .map(|g| (g.lhs - g.rhs).abs() / (g.lhs.abs() + report.config.epsilon))
        .fold(0.0, f64::max);
    println!("gap recovery    {} identities, worst scaled error {worst_gap:.2e}", report.gap.len());
    for r in &report.rank {
        println!("rank agreement  fixture {:>4}  spearman {:.4}", r.fixture_seed, r.spearman);
    }
    for r in &report.radius {
        println!(
            "radius          fixture {:>4}  point {}  [{:+.1}%, {:+.1}%]  worst rel err {:.1e}",
            r.fixture_seed,
            r.index,
            100.0 * r.negative,
            100.0 * r.positive,
            r.max_rel_error
        );
    }
    println!("{}", if report.passed { "all checks passed" } else { "CHECKS FAILED" });
    Ok(())
}
