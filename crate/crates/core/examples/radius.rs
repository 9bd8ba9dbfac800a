//! How far a point's mass can move before the first-order prediction from
//! its calibrated gradient stops matching the re-solved transport cost.

use lava::oracle::unique_instance;
use lava::ot::{self, SolverConfig};
use lava::valuation::{empirical_radius, perturbed_masses, predict_delta};
use lava::{calibrated_gradients, Side};

fn main() -> lava::Result<()> {
    let (cost, solution, seed) = unique_instance(8, 8, 11)?;
    let report = calibrated_gradients(&solution);
    println!("fixture seed {seed}, exact cost {:.6}", solution.objective);
    for i in 0..8 {
        let r = empirical_radius(&cost, &SolverConfig::exact(), i, Side::Train, 1e-6)?;
        // Half of the measured removal radius, predicted and re-solved.
        let delta = 0.5 * r.negative * cost.row_mass[i];
        let moved = cost.with_masses(perturbed_masses(&cost.row_mass, i, delta)?, cost.col_mass.clone())?;
        let actual = ot::solve_exact_lp(&moved, &SolverConfig::exact())?.objective - solution.objective;
        let predicted = predict_delta(&report, i, Side::Train, delta)?;
        println!(
            "point {i}: gradient {:+.4}  exact in [{:+6.1}%, {:+6.1}%]  half-way removal: predicted {predicted:+.3e}, re-solved {actual:+.3e}",
            report.calib_grad_train[i],
            100.0 * r.negative,
            100.0 * r.positive
        );
    }
    Ok(())
}
