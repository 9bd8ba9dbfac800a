//! Entropic OT by Sinkhorn scaling with log-domain absorption.
//!
//! The plan is parametrized as
//!
//! ```text
//! pi_ij = a_i b_j exp((F_i + G_j - C_ij) / eps),   F = f + eps ln u,  G = g + eps ln v
//! ```
//!
//! where `(f, g)` are absorbed potentials baked into the kernel
//! `K_ij = exp((f_i + g_j - C_ij) / eps)` and `(u, v)` are scaling vectors
//! updated by the usual matrix-vector iterations. When a scaling vector
//! leaves `[e^-TAU, e^TAU]` (or a kernel row underflows) its log is absorbed
//! into the potential, a log-sum-exp half step restores the marginal, and
//! the kernel is rebuilt. The kernel never holds an exponent large enough to
//! overflow, which keeps small `eps` usable.
//!
//! Two additions keep the iteration count manageable at small `eps`:
//!
//! - `eps` is annealed from the largest cost down to the target, halving per
//!   stage, with the potentials carried over.
//! - When scaling at its observed rate would take longer than a Newton step
//!   on the dual, one is taken. The Newton system `[[diag(r), P], [P^T, diag(c)]]` is solved
//!   densely for small problems and otherwise by Jacobi-preconditioned
//!   conjugate gradients using only products with the kernel. Each step is
//!   accepted only if it lowers the marginal error.
//!
//! Products with the kernel are split across threads by rows (`K x`) or by
//! column blocks (`K^T x`). Each output entry is summed by one thread in a
//! fixed order, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::matrix::Matrix;
use crate::ot::{
    fix_gauge, marginal_residual, CostMatrix, SolverConfig, SolverMode, TransportSolution,
};
use crate::{Error, Result};

/// Absorption threshold on `|ln u|` and `|ln v|`.
const TAU: f64 = 50.0;

/// Ratio between consecutive regularization strengths when annealing.
const STAGE_FACTOR: f64 = 0.5;
/// Marginal tolerance and iteration budget of each intermediate stage.
const STAGE_TOL: f64 = 1e-3;
const STAGE_ITERS: usize = 100;

/// Scaling iterations between progress checks in the final stage.
const STALL_WINDOW: usize = 20;
/// Newton steps that shrink the error by less than this factor count as
/// failures; after `NEWTON_MAX_FAILURES` in a row only scaling is used.
const NEWTON_GAIN: f64 = 0.5;
const NEWTON_MAX_FAILURES: usize = 3;
/// Failure budget when the system is solved densely, where directions are exact.
const DENSE_NEWTON_MAX_FAILURES: usize = 50;
const CG_MAX_ITERS: usize = 100;
/// Largest `N * M * min(N, M)` for which the Newton system is solved densely.
const DENSE_NEWTON_WORK: usize = 2_000_000_000;
const LINE_SEARCH_STEPS: usize = 8;
const NEWTON_MAX_MOVE: f64 = 40.0;

/// Below this many kernel entries, products run on the calling thread.
const PARALLEL_MIN: usize = 1 << 16;
const COL_BLOCK: usize = 256;

/// Entropic transport with `KL(pi | a x b)` regularization.
pub fn solve_sinkhorn(cost: &CostMatrix, cfg: &SolverConfig) -> Result<TransportSolution> {
    cfg.validate()?;
    if cfg.mode != SolverMode::Sinkhorn {
        return Err(Error::InvalidArgument(
            "solve_sinkhorn requires sinkhorn mode".into(),
        ));
    }
    if cost.values.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCost);
    }
    let schedule = epsilon_schedule(cost, cfg.epsilon);
    let mut state = State::new(cost, schedule[0]);
    let mut iterations = 0;
    for (stage, &eps) in schedule.iter().enumerate() {
        if stage > 0 {
            state.set_epsilon(eps);
        }
        if stage + 1 < schedule.len() {
            let cap = (iterations + STAGE_ITERS).min(cfg.max_iters);
            let tol = cfg.tol.max(STAGE_TOL);
            let start = iterations;
            while iterations < cap && (iterations == start || state.row_error() > tol) {
                state.step();
                iterations += 1;
            }
        } else {
            iterations = state.final_stage(cfg, iterations);
        }
    }
    Ok(state.finish(cost, cfg, iterations))
}

/// Decreasing regularization strengths ending at `eps`.
///
/// Each Sinkhorn iteration moves the potentials by `O(eps)`, so a cold start
/// needs on the order of `max C / eps` iterations. Starting at `eps ~ max C`
/// and halving keeps every stage short.
fn epsilon_schedule(cost: &CostMatrix, eps: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut e = cost.values.max();
    while e > eps {
        out.push(e);
        e *= STAGE_FACTOR;
    }
    out.push(eps);
    out
}

struct State<'a> {
    c: &'a Matrix,
    a: &'a [f64],
    b: &'a [f64],
    eps: f64,
    f: Vec<f64>,
    g: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    kernel: Vec<f64>,
    /// `K (b * v)`, kept current after each column update.
    kv: Vec<f64>,
}

impl<'a> State<'a> {
    fn new(cost: &'a CostMatrix, eps: f64) -> Self {
        let c = &cost.values;
        let (n, m) = c.shape();
        let a = cost.row_mass.as_slice();
        let b = cost.col_mass.as_slice();
        // c-transforms of the zero potential: every kernel row and column then
        // has an entry equal to one.
        let f: Vec<f64> = (0..n)
            .map(|i| {
                c.row(i)
                    .iter()
                    .zip(b)
                    .filter(|(_, &bj)| bj > 0.0)
                    .map(|(&cij, _)| cij)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let mut g = vec![f64::INFINITY; m];
        for i in 0..n {
            if a[i] > 0.0 {
                for (gj, &cij) in g.iter_mut().zip(c.row(i)) {
                    *gj = gj.min(cij - f[i]);
                }
            }
        }
        let mut state = Self {
            c,
            a,
            b,
            eps,
            f,
            g,
            u: vec![1.0; n],
            v: vec![1.0; m],
            kernel: vec![0.0; n * m],
            kv: vec![0.0; n],
        };
        state.rebuild_kernel();
        state.refresh_kv();
        state
    }

    fn n(&self) -> usize {
        self.c.rows()
    }

    fn m(&self) -> usize {
        self.c.cols()
    }

    fn rebuild_kernel(&mut self) {
        let m = self.m();
        let inv = 1.0 / self.eps;
        let (c, f, g) = (self.c, &self.f, &self.g);
        let fill = |(i, row): (usize, &mut [f64])| {
            let fi = f[i];
            for ((k, &cij), &gj) in row.iter_mut().zip(c.row(i)).zip(g) {
                *k = ((fi + gj - cij) * inv).exp();
            }
        };
        if self.kernel.len() >= PARALLEL_MIN {
            self.kernel.par_chunks_mut(m).enumerate().for_each(fill);
        } else {
            self.kernel.chunks_mut(m).enumerate().for_each(fill);
        }
    }

    /// `K x`.
    fn kmul(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m();
        if self.kernel.len() >= PARALLEL_MIN {
            self.kernel.par_chunks(m).map(|row| dot(row, x)).collect()
        } else {
            self.kernel.chunks(m).map(|row| dot(row, x)).collect()
        }
    }

    /// `K^T x`, skipping rows where `x` is zero.
    fn ktmul(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut out = vec![0.0; m];
        let block = |(k, o): (usize, &mut [f64])| {
            let lo = k * COL_BLOCK;
            let hi = lo + o.len();
            for (row, &s) in self.kernel.chunks(m).zip(x) {
                if s != 0.0 {
                    for (o, kij) in o.iter_mut().zip(&row[lo..hi]) {
                        *o += s * kij;
                    }
                }
            }
        };
        if self.kernel.len() >= PARALLEL_MIN {
            out.par_chunks_mut(COL_BLOCK).enumerate().for_each(block);
        } else {
            out.chunks_mut(COL_BLOCK).enumerate().for_each(block);
        }
        out
    }

    fn refresh_kv(&mut self) {
        let bv: Vec<f64> = self.b.iter().zip(&self.v).map(|(b, v)| b * v).collect();
        self.kv = self.kmul(&bv);
    }

    /// `sum_i |a_i u_i (K b v)_i - a_i|`; columns are exact after a step.
    fn row_error(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.u)
            .zip(&self.kv)
            .map(|((a, u), kv)| (a * u * kv - a).abs())
            .sum()
    }

    fn step(&mut self) {
        if self.kv.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
            self.absorb_v();
            self.log_row_update();
            self.rebuild_kernel();
        } else {
            for (u, k) in self.u.iter_mut().zip(&self.kv) {
                *u = 1.0 / k;
            }
        }

        let au: Vec<f64> = self.a.iter().zip(&self.u).map(|(a, u)| a * u).collect();
        let ktu = self.ktmul(&au);
        if ktu.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
            self.absorb_u();
            self.log_col_update();
            self.rebuild_kernel();
        } else {
            for (v, k) in self.v.iter_mut().zip(&ktu) {
                *v = 1.0 / k;
            }
        }

        let out_of_range = self.u.iter().chain(&self.v).any(|x| x.ln().abs() > TAU);
        if out_of_range {
            self.absorb_u();
            self.absorb_v();
            self.rebuild_kernel();
        }
        self.refresh_kv();
    }

    /// Scaling iterations at the target `eps`, switching to Newton steps
    /// whenever progress stalls. Returns the updated iteration count.
    fn final_stage(&mut self, cfg: &SolverConfig, mut iterations: usize) -> usize {
        let mut failures = 0;
        let max_failures = if self.dense_newton() {
            DENSE_NEWTON_MAX_FAILURES
        } else {
            NEWTON_MAX_FAILURES
        };
        let mut window_start = f64::INFINITY;
        let mut in_window = 0;
        let mut first = true;
        while iterations < cfg.max_iters {
            let err = self.row_error();
            if !first && err <= cfg.tol {
                break;
            }
            first = false;
            if in_window == STALL_WINDOW {
                // Newton pays off when finishing by scaling at the observed
                // rate would cost more than the step itself.
                let rate = err / window_start;
                let projected = if rate < 1.0 {
                    STALL_WINDOW as f64 * (cfg.tol / err).ln() / rate.ln()
                } else {
                    f64::INFINITY
                };
                if projected > self.newton_cost() && failures < max_failures {
                    failures = if self.newton_step() { 0 } else { failures + 1 };
                }
                window_start = err;
                in_window = 0;
            }
            if window_start.is_infinite() {
                window_start = err;
            }
            self.step();
            iterations += 1;
            in_window += 1;
        }
        iterations
    }

    /// Marginals of the plan `diag(a) K diag(b)` with `u = v = 1`.
    fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let r: Vec<f64> = self
            .kmul(self.b)
            .iter()
            .zip(self.a)
            .map(|(k, a)| a * k)
            .collect();
        let c: Vec<f64> = self
            .ktmul(self.a)
            .iter()
            .zip(self.b)
            .map(|(k, b)| b * k)
            .collect();
        (r, c)
    }

    fn marginal_error(&self, r: &[f64], c: &[f64]) -> f64 {
        let rows: f64 = r.iter().zip(self.a).map(|(r, a)| (r - a).abs()).sum();
        let cols: f64 = c.iter().zip(self.b).map(|(c, b)| (c - b).abs()).sum();
        rows.max(cols)
    }

    /// One damped Newton step on the dual. A step is kept whenever it lowers
    /// the marginal error; returns whether it lowered it by `NEWTON_GAIN`.
    fn newton_step(&mut self) -> bool {
        self.absorb_u();
        self.absorb_v();
        self.rebuild_kernel();
        let (r, c) = self.marginals();
        let err0 = self.marginal_error(&r, &c);
        let row_active: Vec<bool> = self.a.iter().map(|&a| a > 0.0).collect();
        let col_active: Vec<bool> = self.b.iter().map(|&b| b > 0.0).collect();
        let ok = r
            .iter()
            .zip(&row_active)
            .chain(c.iter().zip(&col_active))
            .all(|(&s, &act)| !act || (s > 0.0 && s.is_finite()));
        let direction = if ok {
            self.newton_direction(&r, &c, &row_active, &col_active)
        } else {
            None
        };
        let Some((dx, dy)) = direction else {
            self.refresh_kv();
            return false;
        };
        let (f0, g0) = (self.f.clone(), self.g.clone());
        // When the plan nearly splits into blocks, the direction shifts whole
        // blocks by amounts the linear model overstates by orders of
        // magnitude; the needed shift is closer to the log of that amount.
        let compress = |d: f64| if d.abs() > 1.0 { d.signum() * (1.0 + d.abs().ln()) } else { d };
        let dx: Vec<f64> = dx.into_iter().map(compress).collect();
        let dy: Vec<f64> = dy.into_iter().map(compress).collect();
        let largest = dx.iter().chain(&dy).fold(0.0f64, |a, d| a.max(d.abs()));
        let mut t = (NEWTON_MAX_MOVE / largest).min(1.0);
        for _ in 0..LINE_SEARCH_STEPS {
            for (f, (f0, d)) in self.f.iter_mut().zip(f0.iter().zip(&dx)) {
                *f = f0 + t * self.eps * d;
            }
            for (g, (g0, d)) in self.g.iter_mut().zip(g0.iter().zip(&dy)) {
                *g = g0 + t * self.eps * d;
            }
            self.rebuild_kernel();
            let (r, c) = self.marginals();
            let err = self.marginal_error(&r, &c);
            if err < err0 {
                self.refresh_kv();
                return err <= NEWTON_GAIN * err0;
            }
            t *= 0.5;
        }
        self.f = f0;
        self.g = g0;
        self.rebuild_kernel();
        self.refresh_kv();
        false
    }

    /// Solves `[[diag(r), P], [P^T, diag(c)]] [x; y] = [a - r; b - c]` with
    /// `P = diag(a) K diag(b)`, densely when small enough and otherwise by
    /// preconditioned conjugate gradients. The
    /// matrix is singular along `(1, -1)`; the right-hand side is orthogonal
    /// to that direction, so CG stays in the range.
    fn newton_direction(
        &self,
        r: &[f64],
        c: &[f64],
        row_active: &[bool],
        col_active: &[bool],
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        let (n, m) = (self.n(), self.m());
        if self.dense_newton() {
            if let Some(d) = self.dense_newton_direction(r, c) {
                return Some(d);
            }
        }
        let apply = |x: &[f64], y: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let by: Vec<f64> = y.iter().zip(self.b).map(|(y, b)| y * b).collect();
            let ax: Vec<f64> = x.iter().zip(self.a).map(|(x, a)| x * a).collect();
            let py = self.kmul(&by);
            let ptx = self.ktmul(&ax);
            let hx = (0..n).map(|i| r[i] * x[i] + self.a[i] * py[i]).collect();
            let hy = (0..m).map(|j| ptx[j] * self.b[j] + c[j] * y[j]).collect();
            (hx, hy)
        };
        let pre_r: Vec<f64> = r
            .iter()
            .zip(row_active)
            .map(|(&r, &act)| if act { 1.0 / r } else { 0.0 })
            .collect();
        let pre_c: Vec<f64> = c
            .iter()
            .zip(col_active)
            .map(|(&c, &act)| if act { 1.0 / c } else { 0.0 })
            .collect();

        let mut x = vec![0.0; n];
        let mut y = vec![0.0; m];
        let mut res_x: Vec<f64> = self.a.iter().zip(r).map(|(a, r)| a - r).collect();
        let mut res_y: Vec<f64> = self.b.iter().zip(c).map(|(b, c)| b - c).collect();
        let rhs_norm = norm2(&res_x, &res_y);
        if rhs_norm == 0.0 {
            return None;
        }
        // Inexact Newton: relative accuracy tightens as the residual shrinks.
        let target = rhs_norm * rhs_norm.sqrt().clamp(1e-6, 0.1);
        let mut z_x: Vec<f64> = res_x.iter().zip(&pre_r).map(|(r, p)| r * p).collect();
        let mut z_y: Vec<f64> = res_y.iter().zip(&pre_c).map(|(r, p)| r * p).collect();
        let mut p_x = z_x.clone();
        let mut p_y = z_y.clone();
        let mut rz = dot2(&res_x, &res_y, &z_x, &z_y);
        for _ in 0..CG_MAX_ITERS {
            let (q_x, q_y) = apply(&p_x, &p_y);
            let pq = dot2(&p_x, &p_y, &q_x, &q_y);
            if !(pq > 0.0) {
                break;
            }
            let alpha = rz / pq;
            axpy(alpha, &p_x, &mut x);
            axpy(alpha, &p_y, &mut y);
            axpy(-alpha, &q_x, &mut res_x);
            axpy(-alpha, &q_y, &mut res_y);
            if norm2(&res_x, &res_y) <= target {
                break;
            }
            z_x = res_x.iter().zip(&pre_r).map(|(r, p)| r * p).collect();
            z_y = res_y.iter().zip(&pre_c).map(|(r, p)| r * p).collect();
            let rz_new = dot2(&res_x, &res_y, &z_x, &z_y);
            let beta = rz_new / rz;
            rz = rz_new;
            for (p, z) in p_x.iter_mut().zip(&z_x) {
                *p = z + beta * *p;
            }
            for (p, z) in p_y.iter_mut().zip(&z_y) {
                *p = z + beta * *p;
            }
        }
        if x.iter().chain(&y).all(|v| v.is_finite()) {
            Some((x, y))
        } else {
            None
        }
    }

    /// Rough cost of one Newton step, in scaling iterations (two kernel
    /// products each).
    fn newton_cost(&self) -> f64 {
        if self.dense_newton() {
            let (lo, hi) = (self.n().min(self.m()) as f64, self.n().max(self.m()) as f64);
            lo / 4.0 + lo * lo / (6.0 * hi)
        } else {
            CG_MAX_ITERS as f64
        }
    }

    /// Whether the Newton system is small enough, and free of zero-mass
    /// points, to be solved densely.
    fn dense_newton(&self) -> bool {
        let (n, m) = (self.n(), self.m());
        n * m * n.min(m) <= DENSE_NEWTON_WORK && self.a.iter().chain(self.b).all(|&w| w > 0.0)
    }

    /// Direct solve of the Newton system through a Schur complement. `None`
    /// if the factorization breaks down, e.g. when the plan has underflowed
    /// into disconnected blocks.
    fn dense_newton_direction(&self, r: &[f64], c: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let m = self.m();
        let mut plan = self.kernel.clone();
        for (i, row) in plan.chunks_mut(m).enumerate() {
            for (p, b) in row.iter_mut().zip(self.b) {
                *p *= self.a[i] * b;
            }
        }
        let plan = Matrix::from_vec(self.n(), m, plan);
        let rhs_x: Vec<f64> = self.a.iter().zip(r).map(|(a, r)| a - r).collect();
        let rhs_y: Vec<f64> = self.b.iter().zip(c).map(|(b, c)| b - c).collect();
        let (x, y) = super::barrier::newton_direction(&plan, &rhs_x, &rhs_y).ok()?;
        x.iter().chain(&y).all(|v| v.is_finite()).then_some((x, y))
    }

    fn set_epsilon(&mut self, eps: f64) {
        self.absorb_u();
        self.absorb_v();
        self.eps = eps;
        self.rebuild_kernel();
        self.refresh_kv();
    }

    fn absorb_u(&mut self) {
        for (f, u) in self.f.iter_mut().zip(self.u.iter_mut()) {
            *f += self.eps * u.ln();
            *u = 1.0;
        }
    }

    fn absorb_v(&mut self) {
        for (g, v) in self.g.iter_mut().zip(self.v.iter_mut()) {
            *g += self.eps * v.ln();
            *v = 1.0;
        }
    }

    /// `f_i = -eps * ln sum_j b_j exp((g_j - C_ij) / eps)`, with `u = 1`.
    fn log_row_update(&mut self) {
        let eps = self.eps;
        for i in 0..self.n() {
            let row = self.c.row(i);
            let shift = row
                .iter()
                .zip(&self.g)
                .zip(self.b)
                .filter(|(_, &b)| b > 0.0)
                .map(|((&c, &g), _)| (g - c) / eps)
                .fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = row
                .iter()
                .zip(&self.g)
                .zip(self.b)
                .filter(|(_, &b)| b > 0.0)
                .map(|((&c, &g), &b)| b * ((g - c) / eps - shift).exp())
                .sum();
            self.f[i] = -eps * (shift + s.ln());
            self.u[i] = 1.0;
        }
    }

    /// `g_j = -eps * ln sum_i a_i exp((f_i - C_ij) / eps)`, with `v = 1`.
    fn log_col_update(&mut self) {
        let eps = self.eps;
        let (n, m) = (self.n(), self.m());
        let mut shift = vec![f64::NEG_INFINITY; m];
        for i in 0..n {
            if self.a[i] > 0.0 {
                for (s, &c) in shift.iter_mut().zip(self.c.row(i)) {
                    *s = s.max((self.f[i] - c) / eps);
                }
            }
        }
        let mut acc = vec![0.0; m];
        for i in 0..n {
            if self.a[i] > 0.0 {
                for ((o, &c), &s) in acc.iter_mut().zip(self.c.row(i)).zip(&shift) {
                    *o += self.a[i] * ((self.f[i] - c) / eps - s).exp();
                }
            }
        }
        for j in 0..m {
            self.g[j] = -eps * (shift[j] + acc[j].ln());
            self.v[j] = 1.0;
        }
    }

    fn finish(
        mut self,
        cost: &CostMatrix,
        cfg: &SolverConfig,
        iterations: usize,
    ) -> TransportSolution {
        let (n, m) = (self.n(), self.m());
        let mut dual_f: Vec<f64> = self
            .f
            .iter()
            .zip(&self.u)
            .map(|(f, u)| f + self.eps * u.ln())
            .collect();
        let mut dual_g: Vec<f64> = self
            .g
            .iter()
            .zip(&self.v)
            .map(|(g, v)| g + self.eps * v.ln())
            .collect();
        let mut plan = std::mem::take(&mut self.kernel);
        for (i, row) in plan.chunks_mut(m).enumerate() {
            let s = self.a[i] * self.u[i];
            for ((p, &bj), &vj) in row.iter_mut().zip(self.b).zip(&self.v) {
                *p *= s * bj * vj;
            }
        }
        let plan = Matrix::from_vec(n, m, plan);
        let objective = plan.dot(&cost.values);
        let residual = marginal_residual(&plan, self.a, self.b);
        fix_gauge(&mut dual_f, &mut dual_g);
        TransportSolution {
            plan,
            dual_f,
            dual_g,
            objective,
            residual,
            iterations,
            mode: SolverMode::Sinkhorn,
            epsilon: cfg.epsilon,
            converged: residual <= cfg.tol,
            row_mass: self.a.to_vec(),
            col_mass: self.b.to_vec(),
        }
    }
}

fn norm2(x: &[f64], y: &[f64]) -> f64 {
    (dot(x, x) + dot(y, y)).sqrt()
}

fn dot2(x1: &[f64], y1: &[f64], x2: &[f64], y2: &[f64]) -> f64 {
    dot(x1, x2) + dot(y1, y2)
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

/// Dot product with eight fixed accumulators; the summation order depends
/// only on the length, so results are reproducible.
#[inline]
pub(super) fn dot(x: &[f64], y: &[f64]) -> f64 {
    const L: usize = 8;
    let y = &y[..x.len()];
    let mut acc = [0.0f64; L];
    for (x, y) in x.chunks_exact(L).zip(y.chunks_exact(L)) {
        for l in 0..L {
            acc[l] += x[l] * y[l];
        }
    }
    let tail = x.len() - x.len() % L;
    let mut sum = x[tail..].iter().zip(&y[tail..]).map(|(a, b)| a * b).sum::<f64>();
    for pair in acc.chunks_exact(2).rev() {
        sum += pair[0] + pair[1];
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair() {
        let cost = CostMatrix::uniform(Matrix::from_rows(&[[0.0]])).unwrap();
        let sol = solve_sinkhorn(&cost, &SolverConfig::sinkhorn(0.1)).unwrap();
        assert!((sol.plan.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(sol.objective.abs() < 1e-12);
        assert_eq!(sol.dual_g, vec![0.0]);
        assert!(sol.converged);
    }

    #[test]
    fn marginals_and_positivity() {
        let c = Matrix::from_rows(&[[0.0, 1.0, 2.0], [1.0, 0.0, 1.5], [2.0, 1.0, 0.3]]);
        let cost = CostMatrix::new(c, vec![0.2, 0.5, 0.3], vec![0.4, 0.4, 0.2]).unwrap();
        let sol = solve_sinkhorn(&cost, &SolverConfig::sinkhorn(0.5)).unwrap();
        assert!(sol.converged);
        assert!(sol.residual <= 1e-6);
        assert!(sol.plan.as_slice().iter().all(|&p| p > 0.0));
        // Plan is recoverable from the reported duals.
        for i in 0..3 {
            for j in 0..3 {
                let expect = cost.row_mass[i]
                    * cost.col_mass[j]
                    * ((sol.dual_f[i] + sol.dual_g[j] - cost.values.get(i, j)) / 0.5).exp();
                assert!((sol.plan.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_epsilon_stays_finite() {
        let c = Matrix::from_rows(&[[0.0, 10.0], [10.0, 0.0]]);
        let cost = CostMatrix::new(c, vec![0.3, 0.7], vec![0.6, 0.4]).unwrap();
        let sol = solve_sinkhorn(&cost, &SolverConfig::sinkhorn(1e-3)).unwrap();
        assert!(sol.converged);
        assert!(sol.dual_f.iter().chain(&sol.dual_g).all(|v| v.is_finite()));
        // Marginal error of at most tol, moved across a cost gap of 10.
        assert!((sol.objective - 3.0).abs() <= 10.0 * 1e-6);
        assert!(sol.iterations < 500, "{} iterations", sol.iterations);
    }

    #[test]
    fn zero_mass_rows() {
        let c = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]]);
        let cost = CostMatrix::new(c, vec![0.5, 0.5, 0.0], vec![0.5, 0.5]).unwrap();
        let sol = solve_sinkhorn(&cost, &SolverConfig::sinkhorn(0.05)).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.plan.row(2), &[0.0, 0.0]);
        assert!(sol.dual_f[2].is_finite());
    }

    #[test]
    fn rejects_bad_config() {
        let cost = CostMatrix::uniform(Matrix::from_rows(&[[0.0]])).unwrap();
        assert!(solve_sinkhorn(&cost, &SolverConfig::sinkhorn(0.0)).is_err());
        assert!(solve_sinkhorn(&cost, &SolverConfig::exact()).is_err());
    }
}
