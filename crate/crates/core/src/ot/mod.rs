//! Discrete optimal transport.
//!
//! Three solvers share one [`TransportSolution`] shape:
//!
//! - [`solve_sinkhorn`]: entropic OT, `min <pi, C> + eps * KL(pi | a x b)`, by
//!   Sinkhorn scaling with log-domain absorption.
//! - [`solve_exact_lp`]: the unregularized transportation LP, by network
//!   simplex. Returns a basic optimal plan and exact duals.
//! - [`solve_log_barrier`]: `min <pi, C> - eps * sum log pi` by damped Newton
//!   on the dual; its stationarity condition is `C - eps / pi - f - g = 0`.
//!
//! Duals follow the usual sign convention: `f_i + g_j <= C_ij`, with equality
//! on the support of an exact plan, so `f` is the gradient of the transport
//! cost with respect to the row masses. Every solver pins the gauge with
//! `g[M - 1] = 0`.

mod barrier;
mod cost;
mod network_simplex;
mod sinkhorn;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

pub use barrier::solve_log_barrier;
pub use cost::{euclidean_cost, pairwise_distances, CostMatrix, GroundMetric};
pub use network_simplex::solve_exact_lp;
pub use sinkhorn::solve_sinkhorn;

/// Largest `N * M` accepted by the exact solver.
pub const EXACT_SIZE_LIMIT: usize = 1_000_000;
/// Largest `N * M` accepted by the log-barrier solver.
pub const BARRIER_SIZE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    Sinkhorn,
    ExactLp,
    LogBarrier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Regularization strength in cost units. Zero for the exact solver.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Target L1 marginal residual.
    pub tol: f64,
    pub mode: SolverMode,
}

impl SolverConfig {
    pub fn sinkhorn(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_iters: 10_000,
            tol: 1e-6,
            mode: SolverMode::Sinkhorn,
        }
    }

    pub fn exact() -> Self {
        Self {
            epsilon: 0.0,
            max_iters: 10_000,
            tol: 1e-9,
            mode: SolverMode::ExactLp,
        }
    }

    pub fn log_barrier(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_iters: 10_000,
            tol: 1e-9,
            mode: SolverMode::LogBarrier,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        match self.mode {
            SolverMode::ExactLp if self.epsilon != 0.0 => Err(Error::InvalidArgument(
                "exact_lp requires epsilon = 0".into(),
            )),
            SolverMode::Sinkhorn | SolverMode::LogBarrier
                if !(self.epsilon > 0.0 && self.epsilon.is_finite()) =>
            {
                Err(Error::InvalidArgument(format!(
                    "{:?} requires epsilon > 0, got {}",
                    self.mode, self.epsilon
                )))
            }
            _ => Ok(()),
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::sinkhorn(0.1)
    }
}

/// Plan, duals and diagnostics of one transport solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportSolution {
    #[serde(skip)]
    pub plan: Matrix,
    pub dual_f: Vec<f64>,
    pub dual_g: Vec<f64>,
    /// `<plan, C>`, excluding any regularization term.
    pub objective: f64,
    /// `max(L1 row-marginal error, L1 column-marginal error)`.
    pub residual: f64,
    pub iterations: usize,
    pub mode: SolverMode,
    pub epsilon: f64,
    pub converged: bool,
    /// Row and column masses the plan was solved for.
    #[serde(skip)]
    pub row_mass: Vec<f64>,
    #[serde(skip)]
    pub col_mass: Vec<f64>,
}

impl TransportSolution {
    /// `Err(NotConverged)` if the solver stopped before reaching its tolerance.
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                residual: self.residual,
                iterations: self.iterations,
            })
        }
    }

    pub fn rows(&self) -> usize {
        self.dual_f.len()
    }

    pub fn cols(&self) -> usize {
        self.dual_g.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Dense plan as CSV, one row per line.
    pub fn plan_csv(&self) -> Result<String> {
        let (n, m) = self.plan.shape();
        if n * m > EXACT_SIZE_LIMIT {
            return Err(Error::InstanceTooLarge {
                size: n * m,
                limit: EXACT_SIZE_LIMIT,
            });
        }
        let mut out = String::with_capacity(n * m * 12);
        for i in 0..n {
            let row: Vec<String> = self.plan.row(i).iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

/// Dispatches on `cfg.mode`.
pub fn solve(cost: &CostMatrix, cfg: &SolverConfig) -> Result<TransportSolution> {
    match cfg.mode {
        SolverMode::Sinkhorn => solve_sinkhorn(cost, cfg),
        SolverMode::ExactLp => solve_exact_lp(cost, cfg),
        SolverMode::LogBarrier => solve_log_barrier(cost, cfg),
    }
}

/// L1 errors of the plan's row and column sums against the target masses.
pub fn marginal_residual(plan: &Matrix, a: &[f64], b: &[f64]) -> f64 {
    let rows: f64 = plan
        .row_sums()
        .iter()
        .zip(a)
        .map(|(s, t)| (s - t).abs())
        .sum();
    let cols: f64 = plan
        .col_sums()
        .iter()
        .zip(b)
        .map(|(s, t)| (s - t).abs())
        .sum();
    rows.max(cols)
}

/// Shifts `(f, g)` to `(f + s, g - s)` with `s = g[M - 1]`.
pub(crate) fn fix_gauge(f: &mut [f64], g: &mut [f64]) {
    let shift = *g.last().expect("non-empty dual");
    for v in f.iter_mut() {
        *v += shift;
    }
    for v in g.iter_mut() {
        *v -= shift;
    }
}
