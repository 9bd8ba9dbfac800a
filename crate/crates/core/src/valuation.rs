//! Datapoint values from transport duals.
//!
//! The calibrated gradient of point `i` on the training side is
//!
//! ```text
//! f_i - sum_{j != i} f_j / (N - 1)  =  N / (N - 1) * (f_i - mean(f))
//! ```
//!
//! i.e. the derivative of the transport cost when point `i` gains mass and
//! every other training point gives up an equal share, so the total stays
//! one. It does not depend on the dual gauge. A point's value is the negated
//! gradient: positive values are points whose extra mass would bring the two
//! datasets closer.

use serde::{Deserialize, Serialize};

use crate::ot::{self, CostMatrix, SolverConfig, SolverMode, TransportSolution};
use crate::rng;
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Train,
    Valid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mode: SolverMode,
    pub epsilon: f64,
    pub distance: f64,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationReport {
    pub calib_grad_train: Vec<f64>,
    pub calib_grad_valid: Vec<f64>,
    /// Exact negation of `calib_grad_train`.
    pub values_train: Vec<f64>,
    pub values_valid: Vec<f64>,
    /// Training indices in ascending value order, ties by index.
    pub ranking_train: Vec<usize>,
    pub masses_train: Vec<f64>,
    pub masses_valid: Vec<f64>,
    pub provenance: Provenance,
    /// Set when a side has a single point; its gradient is reported as zero.
    pub degenerate_train: bool,
    pub degenerate_valid: bool,
}

fn calibrate(duals: &[f64]) -> (Vec<f64>, bool) {
    let n = duals.len();
    if n < 2 {
        return (vec![0.0; n], true);
    }
    let mean = duals.iter().sum::<f64>() / n as f64;
    let scale = n as f64 / (n - 1) as f64;
    (duals.iter().map(|f| scale * (f - mean)).collect(), false)
}

/// Indices sorted by ascending value; stable, so ties keep index order.
pub fn ascending_ranking(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Calibrated gradients and values for both sides of a solved problem.
pub fn calibrated_gradients(sol: &TransportSolution) -> ValuationReport {
    let (calib_grad_train, degenerate_train) = calibrate(&sol.dual_f);
    let (calib_grad_valid, degenerate_valid) = calibrate(&sol.dual_g);
    if degenerate_train || degenerate_valid {
        eprintln!("warning: single-point side, calibrated gradient reported as zero");
    }
    let values_train: Vec<f64> = calib_grad_train.iter().map(|g| -g).collect();
    let values_valid: Vec<f64> = calib_grad_valid.iter().map(|g| -g).collect();
    ValuationReport {
        ranking_train: ascending_ranking(&values_train),
        calib_grad_train,
        calib_grad_valid,
        values_train,
        values_valid,
        masses_train: sol.row_mass.clone(),
        masses_valid: sol.col_mass.clone(),
        provenance: Provenance {
            mode: sol.mode,
            epsilon: sol.epsilon,
            distance: sol.objective,
            residual: sol.residual,
            converged: sol.converged,
        },
        degenerate_train,
        degenerate_valid,
    }
}

impl ValuationReport {
    pub fn gradients(&self, side: Side) -> &[f64] {
        match side {
            Side::Train => &self.calib_grad_train,
            Side::Valid => &self.calib_grad_valid,
        }
    }

    pub fn masses(&self, side: Side) -> &[f64] {
        match side {
            Side::Train => &self.masses_train,
            Side::Valid => &self.masses_valid,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `index,value,calibrated_gradient,rank` for the training side, one row
    /// per point in rank order (rank 0 is the lowest value).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value,calibrated_gradient,rank\n");
        for (rank, &i) in self.ranking_train.iter().enumerate() {
            out.push_str(&format!(
                "{i},{:?},{:?},{rank}\n",
                self.values_train[i], self.calib_grad_train[i]
            ));
        }
        out
    }
}

/// Masses after moving `delta` onto `index` and `-delta / (N - 1)` onto
/// every other point.
pub fn perturbed_masses(masses: &[f64], index: usize, delta: f64) -> Result<Vec<f64>> {
    let n = masses.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "perturbation needs at least two points".into(),
        ));
    }
    let share = delta / (n - 1) as f64;
    let mut out: Vec<f64> = masses.iter().map(|m| m - share).collect();
    out[index] = masses[index] + delta;
    for (k, v) in out.iter_mut().enumerate() {
        if *v < 0.0 {
            // Clamp rounding noise on a full removal.
            if *v > -1e-15 {
                *v = 0.0;
            } else {
                return Err(Error::MassWouldGoNegative { index: k });
            }
        }
    }
    Ok(out)
}

/// First-order change of the transport cost when `index` gains
/// `delta_mass` along the mass-preserving direction.
pub fn predict_delta(
    report: &ValuationReport,
    index: usize,
    side: Side,
    delta_mass: f64,
) -> Result<f64> {
    let grads = report.gradients(side);
    let masses = report.masses(side);
    if index >= grads.len() {
        return Err(Error::InvalidArgument(format!(
            "index {index} out of range"
        )));
    }
    if delta_mass < 0.0 && -delta_mass > masses[index] * (1.0 + 1e-12) {
        return Err(Error::MassWouldGoNegative { index });
    }
    Ok(delta_mass * grads[index])
}

fn cost_with_side_masses(cost: &CostMatrix, side: Side, masses: Vec<f64>) -> Result<CostMatrix> {
    match side {
        Side::Train => cost.with_masses(masses, cost.col_mass.clone()),
        Side::Valid => cost.with_masses(cost.row_mass.clone(), masses),
    }
}

/// Measured range of accurate first-order predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radius {
    /// Largest removal (as a negative fraction of the point's mass).
    pub negative: f64,
    /// Largest addition (as a fraction of the point's mass).
    pub positive: f64,
    pub resolves: usize,
}

/// Maximum re-solves per direction in [`empirical_radius`].
pub const RADIUS_MAX_RESOLVES: usize = 40;

/// Bisects, in each direction, for the largest perturbation of `index`'s mass
/// (as a fraction of that mass, capped at 100%) whose first-order prediction
/// matches a fresh exact solve within `tol_rel` relative error.
pub fn empirical_radius(
    cost: &CostMatrix,
    cfg: &SolverConfig,
    index: usize,
    side: Side,
    tol_rel: f64,
) -> Result<Radius> {
    if cfg.mode != SolverMode::ExactLp {
        return Err(Error::InvalidArgument(
            "empirical_radius requires the exact solver".into(),
        ));
    }
    let base = ot::solve_exact_lp(cost, cfg)?;
    let report = calibrated_gradients(&base);
    let masses = report.masses(side).to_vec();
    let n = masses.len();
    if index >= n {
        return Err(Error::InvalidArgument(format!(
            "index {index} out of range"
        )));
    }
    if n < 2 || masses[index] == 0.0 {
        return Ok(Radius {
            negative: 0.0,
            positive: 0.0,
            resolves: 0,
        });
    }
    let mass = masses[index];
    let grad = report.gradients(side)[index];
    let floor = 1e-12 * base.objective.abs().max(1.0);
    let mut resolves = 0;

    let mut accurate = |fraction: f64, direction: f64| -> Result<bool> {
        let delta = direction * fraction * mass;
        let perturbed = perturbed_masses(&masses, index, delta)?;
        let sol = ot::solve_exact_lp(&cost_with_side_masses(cost, side, perturbed)?, cfg)?;
        resolves += 1;
        let actual = sol.objective - base.objective;
        let predicted = delta * grad;
        let err = (predicted - actual).abs();
        Ok(err <= tol_rel * actual.abs() || err <= floor)
    };

    let others_min = masses
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != index)
        .map(|(_, &m)| m)
        .fold(f64::INFINITY, f64::min);
    let positive_cap = (others_min * (n - 1) as f64 / mass).min(1.0);
    let mut bounds = [0.0f64; 2];
    for (slot, (direction, cap)) in [(-1.0, 1.0), (1.0, positive_cap)].into_iter().enumerate() {
        if cap <= 0.0 {
            continue;
        }
        if accurate(cap, direction)? {
            bounds[slot] = cap;
            continue;
        }
        let (mut lo, mut hi) = (0.0, cap);
        for _ in 1..RADIUS_MAX_RESOLVES {
            let mid = 0.5 * (lo + hi);
            if accurate(mid, direction)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        bounds[slot] = lo;
    }
    Ok(Radius {
        negative: -bounds[0],
        positive: bounds[1],
        resolves,
    })
}

/// Threshold on dual drift in [`dual_uniqueness_drift`] screening.
pub const DUAL_DRIFT_LIMIT: f64 = 1e-6;
const SCREEN_PERTURBATION: f64 = 1e-9;

/// Re-solves with costs perturbed by `+-1e-9` (seeded signs, both
/// orientations) and returns the largest change of the gauge-fixed duals.
pub fn dual_uniqueness_drift(cost: &CostMatrix, base: &TransportSolution) -> Result<f64> {
    let mut rng = rng::seeded(0x5eed);
    let signs: Vec<f64> = (0..cost.values.as_slice().len())
        .map(|_| {
            if rand::Rng::random::<bool>(&mut rng) {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let mut drift = 0.0f64;
    for orientation in [1.0, -1.0] {
        let mut values = cost.values.clone();
        for (v, s) in values.as_mut_slice().iter_mut().zip(&signs) {
            *v = (*v + orientation * s * SCREEN_PERTURBATION).max(0.0);
        }
        let perturbed = CostMatrix::new(values, cost.row_mass.clone(), cost.col_mass.clone())?;
        let sol = ot::solve_exact_lp(&perturbed, &SolverConfig::exact())?;
        for (x, y) in sol
            .dual_f
            .iter()
            .zip(&base.dual_f)
            .chain(sol.dual_g.iter().zip(&base.dual_g))
        {
            drift = drift.max((x - y).abs());
        }
    }
    Ok(drift)
}

/// Exact solve that refuses instances whose optimal duals are not unique:
/// the optimal basis must be primal non-degenerate (`N + M - 1` positive
/// cells) and the duals must not drift under tiny cost perturbations.
pub fn solve_exact_unique(cost: &CostMatrix) -> Result<TransportSolution> {
    let sol = ot::solve_exact_lp(cost, &SolverConfig::exact())?;
    let (n, m) = cost.values.shape();
    let support = sol.plan.count_nonzero(1e-12);
    let drift = dual_uniqueness_drift(cost, &sol)?;
    if support != n + m - 1 || drift > DUAL_DRIFT_LIMIT {
        return Err(Error::DegenerateDuals {
            drift: if drift > DUAL_DRIFT_LIMIT {
                drift
            } else {
                f64::INFINITY
            },
        });
    }
    Ok(sol)
}

/// Columns `j` with `(i, j)` and `(k, j)` both in the plan's support.
pub fn common_support_columns(sol: &TransportSolution, i: usize, k: usize) -> Vec<usize> {
    (0..sol.cols())
        .filter(|&j| sol.plan.get(i, j) > 0.0 && sol.plan.get(k, j) > 0.0)
        .collect()
}

/// Rows `o` with `(o, p)` and `(o, q)` both in the plan's support.
pub fn common_support_rows(sol: &TransportSolution, p: usize, q: usize) -> Vec<usize> {
    (0..sol.rows())
        .filter(|&o| sol.plan.get(o, p) > 0.0 && sol.plan.get(o, q) > 0.0)
        .collect()
}

/// Both sides of the gap-recovery identity between exact and log-barrier
/// calibrated gradients.
///
/// Train side (`i`, `k` rows, `j` a column):
///
/// ```text
/// lhs = G_i - G_k                                  (exact LP)
/// rhs = G^eps_i - G^eps_k - eps * N/(N-1) * (1/pi_kj - 1/pi_ij)   (barrier)
/// ```
///
/// Valid side (`i`, `k` columns `p`, `q`; `j` a row `o`) uses
/// `M/(M-1) * (1/pi_oq - 1/pi_op)`.
pub fn gap_recovery_check(
    cost: &CostMatrix,
    epsilon: f64,
    i: usize,
    k: usize,
    j: usize,
    side: Side,
) -> Result<(f64, f64)> {
    let exact = solve_exact_unique(cost)?;
    let barrier =
        ot::solve_log_barrier(cost, &SolverConfig::log_barrier(epsilon))?.into_converged()?;
    gap_recovery_from(&exact, &barrier, i, k, j, side)
}

/// [`gap_recovery_check`] on already solved problems.
pub fn gap_recovery_from(
    exact: &TransportSolution,
    barrier: &TransportSolution,
    i: usize,
    k: usize,
    j: usize,
    side: Side,
) -> Result<(f64, f64)> {
    let exact_report = calibrated_gradients(exact);
    let barrier_report = calibrated_gradients(barrier);
    let eps = barrier.epsilon;
    let (n, m) = (exact.rows(), exact.cols());
    let (len, other) = match side {
        Side::Train => (n, m),
        Side::Valid => (m, n),
    };
    if i >= len || k >= len || j >= other {
        return Err(Error::InvalidArgument(
            "gap recovery index out of range".into(),
        ));
    }
    let ge = exact_report.gradients(side);
    let gb = barrier_report.gradients(side);
    let lhs = ge[i] - ge[k];
    let scale = len as f64 / (len - 1) as f64;
    let correction = match side {
        Side::Train => 1.0 / barrier.plan.get(k, j) - 1.0 / barrier.plan.get(i, j),
        Side::Valid => 1.0 / barrier.plan.get(j, k) - 1.0 / barrier.plan.get(j, i),
    };
    let rhs = gb[i] - gb[k] - eps * scale * correction;
    Ok((lhs, rhs))
}

/// Spearman correlation between training-side values from exact duals and
/// from entropic duals.
pub fn rank_agreement(
    cost: &CostMatrix,
    cfg_entropic: &SolverConfig,
    size_cap: usize,
) -> Result<f64> {
    let size = cost.rows() * cost.cols();
    if size > size_cap {
        return Err(Error::InstanceTooLarge {
            size,
            limit: size_cap,
        });
    }
    let exact = ot::solve_exact_lp(cost, &SolverConfig::exact())?;
    let entropic = ot::solve(cost, cfg_entropic)?.into_converged()?;
    let a = calibrated_gradients(&exact);
    let b = calibrated_gradients(&entropic);
    Ok(stats::spearman(&a.values_train, &b.values_train))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn solution_with_duals(f: Vec<f64>, g: Vec<f64>) -> TransportSolution {
        let (n, m) = (f.len(), g.len());
        TransportSolution {
            plan: Matrix::zeros(n, m),
            row_mass: vec![1.0 / n as f64; n],
            col_mass: vec![1.0 / m as f64; m],
            dual_f: f,
            dual_g: g,
            objective: 0.0,
            residual: 0.0,
            iterations: 0,
            mode: SolverMode::ExactLp,
            epsilon: 0.0,
            converged: true,
        }
    }

    #[test]
    fn two_point_formula() {
        let r = calibrated_gradients(&solution_with_duals(vec![3.0, 1.0], vec![0.0, 0.0]));
        assert_eq!(r.calib_grad_train, vec![2.0, -2.0]);
        assert_eq!(r.values_train, vec![-2.0, 2.0]);
        assert_eq!(r.ranking_train, vec![0, 1]);
        assert_eq!(r.calib_grad_valid, vec![0.0, 0.0]);
    }

    #[test]
    fn constant_duals_give_zero() {
        let r = calibrated_gradients(&solution_with_duals(vec![0.7; 5], vec![-0.7; 3]));
        assert!(r.calib_grad_train.iter().all(|&g| g.abs() < 1e-15));
        assert!(r.calib_grad_valid.iter().all(|&g| g.abs() < 1e-15));
    }

    #[test]
    fn degenerate_single_point() {
        let r = calibrated_gradients(&solution_with_duals(vec![4.0], vec![1.0, 2.0]));
        assert!(r.degenerate_train && !r.degenerate_valid);
        assert_eq!(r.calib_grad_train, vec![0.0]);
    }

    #[test]
    fn ties_rank_by_index() {
        let r = calibrated_gradients(&solution_with_duals(
            vec![1.0, 2.0, 1.0, 2.0],
            vec![0.0, 0.0],
        ));
        assert_eq!(r.ranking_train, vec![1, 3, 0, 2]);
    }

    #[test]
    fn predict_delta_contract() {
        let r = calibrated_gradients(&solution_with_duals(vec![3.0, 1.0], vec![0.0, 0.0]));
        assert_eq!(predict_delta(&r, 0, Side::Train, 0.0).unwrap(), 0.0);
        assert_eq!(predict_delta(&r, 0, Side::Train, 0.25).unwrap(), 0.5);
        assert_eq!(predict_delta(&r, 1, Side::Train, -0.5).unwrap(), 1.0);
        assert!(matches!(
            predict_delta(&r, 1, Side::Train, -0.6),
            Err(Error::MassWouldGoNegative { index: 1 })
        ));
    }

    #[test]
    fn perturbation_keeps_total_mass() {
        let m = perturbed_masses(&[0.25, 0.25, 0.5], 2, -0.5).unwrap();
        assert_eq!(m, vec![0.5, 0.5, 0.0]);
        assert!(matches!(
            perturbed_masses(&[0.1, 0.4, 0.5], 2, 0.4),
            Err(Error::MassWouldGoNegative { index: 0 })
        ));
    }

    #[test]
    fn csv_rows_in_rank_order() {
        let r = calibrated_gradients(&solution_with_duals(vec![3.0, 1.0, 2.0], vec![0.0, 0.0]));
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,value,calibrated_gradient,rank");
        assert!(lines[1].starts_with("0,"));
        assert!(lines[3].starts_with("1,"));
        assert_eq!(lines.len(), 4);
    }
}
