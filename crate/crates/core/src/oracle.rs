//! Generated fixtures and the verification bundle behind `lava oracle-check`.
//!
//! Fixtures are random planar point clouds with Euclidean costs and random,
//! strictly positive, non-uniform masses. Uniform masses make the exact LP
//! degenerate far too often for its duals to be unique, which the identities
//! checked here require.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::ot::{self, euclidean_cost, CostMatrix, SolverConfig, TransportSolution};
use crate::rng;
use crate::valuation::{
    self, calibrated_gradients, common_support_columns, common_support_rows, empirical_radius,
    gap_recovery_from, perturbed_masses, predict_delta, Side,
};
use crate::{Error, Result};

/// Random masses in `[0.5, 1.5]`, normalized.
fn random_masses(rng: &mut rng::Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let mut out: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let drift: f64 = 1.0 - out.iter().sum::<f64>();
    out[0] += drift;
    out
}

fn random_points(rng: &mut rng::Rng, n: usize) -> Matrix {
    let data = (0..2 * n).map(|_| rng.random_range(0.0..1.0)).collect();
    Matrix::from_vec(n, 2, data)
}

/// `n x m` Euclidean instance on uniform points in the unit square.
pub fn random_instance(n: usize, m: usize, seed: u64) -> Result<CostMatrix> {
    if n == 0 || m == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = rng::seeded(seed);
    let x = random_points(&mut rng, n);
    let y = random_points(&mut rng, m);
    let a = random_masses(&mut rng, n);
    let b = random_masses(&mut rng, m);
    euclidean_cost(&x, &y)?.with_masses(a, b)
}

/// Attempts made by [`unique_instance`] before giving up.
pub const UNIQUE_ATTEMPTS: u64 = 64;

/// First instance derived from `seed` whose exact duals pass the uniqueness
/// screen, with its exact solution and the seed that produced it.
pub fn unique_instance(n: usize, m: usize, seed: u64) -> Result<(CostMatrix, TransportSolution, u64)> {
    let mut last = Error::DegenerateDuals { drift: f64::INFINITY };
    for attempt in 0..UNIQUE_ATTEMPTS {
        let s = seed.wrapping_mul(UNIQUE_ATTEMPTS).wrapping_add(attempt);
        let cost = random_instance(n, m, s)?;
        match valuation::solve_exact_unique(&cost) {
            Ok(sol) => return Ok((cost, sol, s)),
            Err(e @ Error::DegenerateDuals { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Fixtures are `size x size`.
    pub size: usize,
    /// Log-barrier strength for the gap-recovery identity, in cost units.
    pub epsilon: f64,
    pub seed: u64,
    pub fixtures: usize,
    /// Sinkhorn strength for rank agreement, relative to the mean cost.
    pub rank_epsilon_rel: f64,
    pub rank_threshold: f64,
    /// Relative accuracy that defines the first-order radius.
    pub radius_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            size: 6,
            epsilon: 1e-3,
            seed: 0,
            fixtures: 5,
            rank_epsilon_rel: 1e-3,
            rank_threshold: 0.99,
            radius_tol: 1e-6,
        }
    }
}

/// Relative tolerance of the gap-recovery identity: `|lhs - rhs| <= GAP_TOL * (|lhs| + eps)`.
pub const GAP_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    pub fixture_seed: u64,
    pub side: Side,
    pub i: usize,
    pub k: usize,
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCheck {
    pub fixture_seed: u64,
    pub spearman: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusCheck {
    pub fixture_seed: u64,
    pub index: usize,
    pub negative: f64,
    pub positive: f64,
    /// Worst relative error of the prediction at interior probe points.
    pub max_rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub config: OracleConfig,
    pub gap: Vec<GapCheck>,
    pub rank: Vec<RankCheck>,
    pub radius: Vec<RadiusCheck>,
    pub passed: bool,
}

/// Gap-recovery checks for every pair of points sharing a support cell
/// partner, on both sides.
pub fn gap_checks(
    exact: &TransportSolution,
    barrier: &TransportSolution,
    fixture_seed: u64,
) -> Result<Vec<GapCheck>> {
    let eps = barrier.epsilon;
    let mut out = Vec::new();
    let mut push = |side, i, k, j| -> Result<()> {
        let (lhs, rhs) = gap_recovery_from(exact, barrier, i, k, j, side)?;
        let pass = (lhs - rhs).abs() <= GAP_TOL * (lhs.abs() + eps);
        out.push(GapCheck { fixture_seed, side, i, k, j, lhs, rhs, pass });
        Ok(())
    };
    for i in 0..exact.rows() {
        for k in i + 1..exact.rows() {
            if let Some(&j) = common_support_columns(exact, i, k).first() {
                push(Side::Train, i, k, j)?;
            }
        }
    }
    for p in 0..exact.cols() {
        for q in p + 1..exact.cols() {
            if let Some(&o) = common_support_rows(exact, p, q).first() {
                push(Side::Valid, p, q, o)?;
            }
        }
    }
    Ok(out)
}

/// Measures the first-order radius of `index` and probes the prediction at
/// a quarter, half and the full radius in both directions.
pub fn radius_check(
    cost: &CostMatrix,
    exact: &TransportSolution,
    index: usize,
    tol: f64,
    fixture_seed: u64,
) -> Result<RadiusCheck> {
    let radius = empirical_radius(cost, &SolverConfig::exact(), index, Side::Train, tol)?;
    let report = calibrated_gradients(exact);
    let mass = cost.row_mass[index];
    let floor = 1e-12 * exact.objective.abs().max(1.0);
    let mut worst = 0.0f64;
    let mut pass = true;
    for extent in [radius.negative, radius.positive] {
        for share in [0.25, 0.5, 1.0] {
            let delta = share * extent * mass;
            if delta == 0.0 {
                continue;
            }
            let masses = perturbed_masses(&cost.row_mass, index, delta)?;
            let moved = cost.with_masses(masses, cost.col_mass.clone())?;
            let actual = ot::solve_exact_lp(&moved, &SolverConfig::exact())?.objective - exact.objective;
            let predicted = predict_delta(&report, index, Side::Train, delta)?;
            let err = (predicted - actual).abs();
            if err > floor {
                let rel = err / actual.abs().max(f64::MIN_POSITIVE);
                worst = worst.max(rel);
                pass &= rel <= tol;
            }
        }
    }
    Ok(RadiusCheck {
        fixture_seed,
        index,
        negative: radius.negative,
        positive: radius.positive,
        max_rel_error: worst,
        pass,
    })
}

/// Runs gap recovery, rank agreement and radius checks on `cfg.fixtures`
/// generated `size x size` instances.
pub fn run_oracle_checks(cfg: &OracleConfig) -> Result<OracleReport> {
    if cfg.size < 2 || cfg.size * cfg.size > ot::BARRIER_SIZE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "oracle size must be in [2, 64], got {}",
            cfg.size
        )));
    }
    if !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidArgument("oracle epsilon must be > 0".into()));
    }
    let mut gap = Vec::new();
    let mut rank = Vec::new();
    let mut radius = Vec::new();
    for f in 0..cfg.fixtures as u64 {
        let (cost, exact, fixture_seed) = unique_instance(cfg.size, cfg.size, cfg.seed.wrapping_add(f))?;
        let barrier = ot::solve_log_barrier(&cost, &SolverConfig::log_barrier(cfg.epsilon))?.into_converged()?;
        gap.extend(gap_checks(&exact, &barrier, fixture_seed)?);

        let eps = cfg.rank_epsilon_rel * cost.values.mean();
        let spearman = valuation::rank_agreement(&cost, &SolverConfig::sinkhorn(eps), ot::EXACT_SIZE_LIMIT)?;
        rank.push(RankCheck { fixture_seed, spearman, pass: spearman >= cfg.rank_threshold });

        let index = (f as usize) % cfg.size;
        radius.push(radius_check(&cost, &exact, index, cfg.radius_tol, fixture_seed)?);
    }
    let passed = gap.iter().all(|g| g.pass) && rank.iter().all(|r| r.pass) && radius.iter().all(|r| r.pass);
    Ok(OracleReport { config: *cfg, gap, rank, radius, passed })
}
