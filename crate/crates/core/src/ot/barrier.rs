//! Log-barrier penalized transport.
//!
//! Primal: `min <pi, C> - eps * sum_ij log(pi_ij / (a_i b_j))` over couplings.
//! Stationarity gives `pi_ij = eps / (C_ij - f_i - g_j)`, so the solver works
//! on the concave dual
//!
//! ```text
//! D(f, g) = <a, f> + <b, g> + eps * sum_ij ln(C_ij - f_i - g_j)
//! ```
//!
//! with `g[M - 1] = 0` fixed, by damped Newton. The gradient of `D` is the
//! marginal violation of the implied plan, so the stopping rule is the same
//! L1 residual used by the other solvers.

use super::sinkhorn::dot;
use crate::matrix::Matrix;
use crate::ot::{
    marginal_residual, CostMatrix, SolverConfig, SolverMode, TransportSolution, BARRIER_SIZE_LIMIT,
};
use crate::{Error, Result};

pub fn solve_log_barrier(cost: &CostMatrix, cfg: &SolverConfig) -> Result<TransportSolution> {
    cfg.validate()?;
    if cfg.mode != SolverMode::LogBarrier {
        return Err(Error::InvalidArgument(
            "solve_log_barrier requires log_barrier mode".into(),
        ));
    }
    let (n, m) = cost.values.shape();
    if n * m > BARRIER_SIZE_LIMIT {
        return Err(Error::InstanceTooLarge {
            size: n * m,
            limit: BARRIER_SIZE_LIMIT,
        });
    }
    if cost.values.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCost);
    }
    if cost
        .row_mass
        .iter()
        .chain(&cost.col_mass)
        .any(|&w| w <= 0.0)
    {
        return Err(Error::InvalidArgument(
            "log-barrier transport needs strictly positive masses".into(),
        ));
    }
    let eps = cfg.epsilon;
    let c = &cost.values;
    let a = &cost.row_mass;
    let b = &cost.col_mass;

    // Strictly feasible start: every slack at least `margin`.
    let margin = c.mean().max(eps).max(1e-12);
    let mut f: Vec<f64> = (0..n)
        .map(|i| c.row(i).iter().copied().fold(f64::INFINITY, f64::min) - margin)
        .collect();
    let mut g = vec![0.0; m];
    for j in 0..m - 1 {
        g[j] = (0..n)
            .map(|i| c.get(i, j) - f[i])
            .fold(f64::INFINITY, f64::min)
            - margin;
    }

    let mut iterations = 0;
    let mut value = dual_value(c, a, b, eps, &f, &g).expect("feasible start");
    loop {
        let plan = implied_plan(c, eps, &f, &g);
        let residual = marginal_residual(&plan, a, b);
        if residual <= cfg.tol || iterations >= cfg.max_iters {
            let objective = plan.dot(c);
            return Ok(TransportSolution {
                plan,
                dual_f: f,
                dual_g: g,
                objective,
                residual,
                iterations,
                mode: SolverMode::LogBarrier,
                epsilon: eps,
                converged: residual <= cfg.tol,
                row_mass: a.clone(),
                col_mass: b.clone(),
            });
        }
        iterations += 1;

        let grad_f: Vec<f64> = plan.row_sums().iter().zip(a).map(|(s, a)| a - s).collect();
        let grad_g: Vec<f64> = plan.col_sums().iter().zip(b).map(|(s, b)| b - s).collect();
        // Negative Hessian blocks: W_ij = pi_ij^2 / eps.
        let w = plan.map(|p| p * p / eps);
        let (df, dg) = newton_direction(&w, &grad_f, &grad_g)?;

        let slope: f64 = df.iter().zip(&grad_f).map(|(d, g)| d * g).sum::<f64>()
            + dg.iter().zip(&grad_g).map(|(d, g)| d * g).sum::<f64>();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let f_try: Vec<f64> = f.iter().zip(&df).map(|(x, d)| x + step * d).collect();
            let g_try: Vec<f64> = g.iter().zip(&dg).map(|(x, d)| x + step * d).collect();
            if let Some(v) = dual_value(c, a, b, eps, &f_try, &g_try) {
                if v >= value + 1e-4 * step * slope || (v - value).abs() <= 1e-15 * value.abs() {
                    f = f_try;
                    g = g_try;
                    value = v;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // No further progress is representable; report what we have.
            let plan = implied_plan(c, eps, &f, &g);
            let residual = marginal_residual(&plan, a, b);
            let objective = plan.dot(c);
            return Ok(TransportSolution {
                plan,
                dual_f: f,
                dual_g: g,
                objective,
                residual,
                iterations,
                mode: SolverMode::LogBarrier,
                epsilon: eps,
                converged: residual <= cfg.tol,
                row_mass: a.clone(),
                col_mass: b.clone(),
            });
        }
    }
}

fn implied_plan(c: &Matrix, eps: f64, f: &[f64], g: &[f64]) -> Matrix {
    let (n, m) = c.shape();
    let mut plan = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            plan.set(i, j, eps / (c.get(i, j) - f[i] - g[j]));
        }
    }
    plan
}

/// Dual objective, or `None` outside the domain `C - f - g > 0`.
fn dual_value(c: &Matrix, a: &[f64], b: &[f64], eps: f64, f: &[f64], g: &[f64]) -> Option<f64> {
    let mut logs = 0.0;
    for i in 0..c.rows() {
        for j in 0..c.cols() {
            let s = c.get(i, j) - f[i] - g[j];
            if !(s > 0.0) {
                return None;
            }
            logs += s.ln();
        }
    }
    let lin: f64 = a.iter().zip(f).map(|(a, f)| a * f).sum::<f64>()
        + b.iter().zip(g).map(|(b, g)| b * g).sum::<f64>();
    Some(lin + eps * logs)
}

/// Solves `P [df; dg] = [grad_f; grad_g]` with `P = [[diag(r), W], [W^T, diag(c)]]`
/// and `dg[M - 1] = 0`, eliminating whichever side leaves the smaller dense
/// system.
pub(super) fn newton_direction(w: &Matrix, grad_f: &[f64], grad_g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, m) = w.shape();
    let r = w.row_sums();
    let cs = w.col_sums();
    let free = m - 1;
    let mut df = vec![0.0; n];
    let mut dg = vec![0.0; m];
    if free >= n {
        // Eliminate the free g block: S = diag(r) - V V^T with
        // V_ij = W_ij / sqrt(c_j).
        let scale: Vec<f64> = cs[..free].iter().map(|c| 1.0 / c.sqrt()).collect();
        let v: Vec<Vec<f64>> = (0..n)
            .map(|i| w.row(i)[..free].iter().zip(&scale).map(|(x, s)| x * s).collect())
            .collect();
        let s = schur(&r, &v);
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let row = &w.row(i)[..free];
                grad_f[i] - row.iter().zip(grad_g).zip(&cs).map(|((w, g), c)| w * g / c).sum::<f64>()
            })
            .collect();
        df = cholesky_solve(s, rhs)?;
        let mut acc = vec![0.0; free];
        for (i, d) in df.iter().enumerate() {
            for (a, x) in acc.iter_mut().zip(&w.row(i)[..free]) {
                *a += x * d;
            }
        }
        for j in 0..free {
            dg[j] = (grad_g[j] - acc[j]) / cs[j];
        }
    } else {
        // Eliminate f: S = diag(c) - V V^T with V_ji = W_ij / sqrt(r_i).
        let scale: Vec<f64> = r.iter().map(|r| 1.0 / r.sqrt()).collect();
        let mut v = vec![vec![0.0; n]; free];
        for i in 0..n {
            for (j, x) in w.row(i)[..free].iter().enumerate() {
                v[j][i] = x * scale[i];
            }
        }
        let s = schur(&cs[..free], &v);
        let mut rhs: Vec<f64> = grad_g[..free].to_vec();
        for i in 0..n {
            let t = grad_f[i] / r[i];
            for (h, x) in rhs.iter_mut().zip(&w.row(i)[..free]) {
                *h -= x * t;
            }
        }
        let sol = cholesky_solve(s, rhs)?;
        dg[..free].copy_from_slice(&sol);
        for i in 0..n {
            let acc: f64 = w.row(i)[..free].iter().zip(&sol).map(|(w, d)| w * d).sum();
            df[i] = (grad_f[i] - acc) / r[i];
        }
    }
    Ok((df, dg))
}

/// `diag(d) - V V^T`, lower triangle filled.
fn schur(d: &[f64], v: &[Vec<f64>]) -> Matrix {
    let k = d.len();
    let mut s = Matrix::zeros(k, k);
    for i in 0..k {
        let row = s.row_mut(i);
        let quads = (i + 1) / 4;
        for q in 0..quads {
            let p = 4 * q;
            let dots = dot4(&v[i], [&v[p], &v[p + 1], &v[p + 2], &v[p + 3]]);
            for (out, x) in row[p..p + 4].iter_mut().zip(dots) {
                *out = -x;
            }
        }
        for p in 4 * quads..=i {
            row[p] = -dot(&v[i], &v[p]);
        }
        row[i] += d[i];
    }
    s
}

/// Four dot products sharing `x`, which halves the loads of separate calls.
fn dot4(x: &[f64], ys: [&[f64]; 4]) -> [f64; 4] {
    const L: usize = 4;
    let n = x.len();
    let [y0, y1, y2, y3] = ys.map(|y| &y[..n]);
    let mut acc = [[0.0f64; L]; 4];
    let chunks = x
        .chunks_exact(L)
        .zip(y0.chunks_exact(L))
        .zip(y1.chunks_exact(L))
        .zip(y2.chunks_exact(L))
        .zip(y3.chunks_exact(L));
    for ((((x, a), b), c), d) in chunks {
        for l in 0..L {
            acc[0][l] += x[l] * a[l];
            acc[1][l] += x[l] * b[l];
            acc[2][l] += x[l] * c[l];
            acc[3][l] += x[l] * d[l];
        }
    }
    let tail = n - n % L;
    let mut out = [0.0; 4];
    for (k, y) in [y0, y1, y2, y3].into_iter().enumerate() {
        let a = acc[k];
        out[k] = (a[0] + a[1]) + (a[2] + a[3]) + dot(&x[tail..], &y[tail..]);
    }
    out
}

/// Solves `A x = b` for symmetric positive definite `A`, reading only the
/// lower triangle.
fn cholesky_solve(mut a: Matrix, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = a.rows();
    let breakdown = || Error::NotConverged {
        residual: f64::NAN,
        iterations: 0,
    };
    // Row-oriented factorization: L_ij = (A_ij - <L_i, L_j>) / L_jj.
    let data = a.as_mut_slice();
    for i in 0..n {
        let (done, rest) = data.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        for j in 0..i {
            let row_j = &done[j * n..j * n + n];
            row_i[j] = (row_i[j] - dot(&row_i[..j], &row_j[..j])) / row_j[j];
        }
        let d = row_i[i] - dot(&row_i[..i], &row_i[..i]);
        if !(d > 0.0) {
            return Err(breakdown());
        }
        row_i[i] = d.sqrt();
    }
    for i in 0..n {
        let row = a.row(i);
        b[i] = (b[i] - dot(&row[..i], &b[..i])) / row[i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for p in i + 1..n {
            v -= a.get(p, i) * b[p];
        }
        b[i] = v / a.get(i, i);
    }
    Ok(b)
}
