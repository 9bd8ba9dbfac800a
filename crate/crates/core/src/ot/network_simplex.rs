//! Exact transportation LP by primal network simplex.
//!
//! Rows are supply nodes, columns demand nodes, and every cell `(i, j)` is an
//! uncapacitated arc `i -> j` with cost `C_ij`. An artificial root joined to
//! every node by a big-M arc gives a strongly feasible starting tree; the
//! leaving arc is chosen by Cunningham's rule (last blocking arc along the
//! cycle oriented by the entering arc), which rules out cycling on the
//! degenerate pivots that uniform masses produce. Pricing is block search.
//!
//! Node potentials give the duals: `f_i = pot(row i)`, `g_j = -pot(col j)`,
//! so a tree arc satisfies `f_i + g_j = C_ij` and optimality means
//! `C_ij - f_i - g_j >= 0` on every cell.

use crate::matrix::Matrix;
use crate::ot::{
    fix_gauge, marginal_residual, CostMatrix, SolverConfig, SolverMode, TransportSolution,
    EXACT_SIZE_LIMIT,
};
use crate::{Error, Result};

/// Reduced costs above `-PRICE_TOL * scale` are treated as non-negative.
const PRICE_TOL: f64 = 1e-13;

/// Solves the transportation LP exactly.
pub fn solve_exact_lp(cost: &CostMatrix, cfg: &SolverConfig) -> Result<TransportSolution> {
    cfg.validate()?;
    if cfg.mode != SolverMode::ExactLp {
        return Err(Error::InvalidArgument(
            "solve_exact_lp requires exact_lp mode".into(),
        ));
    }
    let (n, m) = cost.values.shape();
    if n * m > EXACT_SIZE_LIMIT {
        return Err(Error::InstanceTooLarge {
            size: n * m,
            limit: EXACT_SIZE_LIMIT,
        });
    }
    if cost.values.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCost);
    }
    let mut net = Network::new(cost);
    let pivots = net.run()?;
    let (mut dual_f, mut dual_g) = net.duals();
    fix_gauge(&mut dual_f, &mut dual_g);
    let plan = net.plan();
    let objective = plan.dot(&cost.values);
    let residual = marginal_residual(&plan, &cost.row_mass, &cost.col_mass);
    Ok(TransportSolution {
        plan,
        dual_f,
        dual_g,
        objective,
        residual,
        iterations: pivots,
        mode: SolverMode::ExactLp,
        epsilon: 0.0,
        converged: residual <= cfg.tol.max(1e-9),
        row_mass: cost.row_mass.clone(),
        col_mass: cost.col_mass.clone(),
    })
}

struct Network<'a> {
    n: usize,
    m: usize,
    cost: &'a Matrix,
    /// Cost of artificial arcs.
    big_m: f64,
    /// Artificial arcs point toward the root for nodes with non-negative
    /// supply and away from it for columns with positive demand.
    art_up: Vec<bool>,
    scale: f64,
    /// Flow per arc; real arcs `0..n*m`, artificial arc of node `v` at `n*m + v`.
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    /// Tree arcs incident to each node (root included).
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    /// True when `pred[v]` is directed from `v` to its parent.
    up: Vec<bool>,
    depth: Vec<usize>,
    pot: Vec<f64>,
    next_arc: usize,
    block: usize,
}

const NONE: usize = usize::MAX;

impl<'a> Network<'a> {
    fn new(cost: &'a CostMatrix) -> Self {
        let (n, m) = cost.values.shape();
        let nodes = n + m + 1;
        let root = n + m;
        let arcs = n * m + n + m;
        let max_c = cost.values.max().max(0.0);
        let big_m = (max_c + 1.0) * (nodes as f64);
        let mut net = Network {
            n,
            m,
            cost: &cost.values,
            big_m,
            art_up: (0..n + m)
                .map(|v| v < n || cost.col_mass[v - n] == 0.0)
                .collect(),
            scale: max_c.max(1.0),
            flow: vec![0.0; arcs],
            in_tree: vec![false; arcs],
            adj: vec![Vec::new(); nodes],
            parent: vec![NONE; nodes],
            pred: vec![NONE; nodes],
            up: vec![false; nodes],
            depth: vec![0; nodes],
            pot: vec![0.0; nodes],
            next_arc: 0,
            block: ((arcs as f64).sqrt() as usize).max(10),
        };
        for v in 0..n + m {
            let arc = n * m + v;
            let supply = if v < n {
                cost.row_mass[v]
            } else {
                -cost.col_mass[v - n]
            };
            net.flow[arc] = supply.abs();
            net.in_tree[arc] = true;
            net.adj[v].push(arc);
            net.adj[root].push(arc);
        }
        net.rebuild_tree();
        net
    }

    fn root(&self) -> usize {
        self.n + self.m
    }

    /// Endpoints `(tail, head)` of an arc.
    fn ends(&self, arc: usize) -> (usize, usize) {
        let nm = self.n * self.m;
        if arc < nm {
            (arc / self.m, self.n + arc % self.m)
        } else {
            let v = arc - nm;
            if self.art_up[v] {
                (v, self.root())
            } else {
                (self.root(), v)
            }
        }
    }

    fn arc_cost(&self, arc: usize) -> f64 {
        let nm = self.n * self.m;
        if arc < nm {
            self.cost.as_slice()[arc]
        } else {
            self.big_m
        }
    }

    fn reduced_cost(&self, arc: usize) -> f64 {
        let (t, h) = self.ends(arc);
        self.arc_cost(arc) - self.pot[t] + self.pot[h]
    }

    /// Recomputes parent pointers, depths and potentials from the tree arcs.
    fn rebuild_tree(&mut self) {
        let root = self.root();
        self.parent[root] = NONE;
        self.pred[root] = NONE;
        self.depth[root] = 0;
        self.pot[root] = 0.0;
        let mut stack = vec![root];
        let mut visited = vec![false; self.n + self.m + 1];
        visited[root] = true;
        while let Some(x) = stack.pop() {
            for k in 0..self.adj[x].len() {
                let arc = self.adj[x][k];
                let (t, h) = self.ends(arc);
                let y = if t == x { h } else { t };
                if visited[y] {
                    continue;
                }
                visited[y] = true;
                self.parent[y] = x;
                self.pred[y] = arc;
                self.depth[y] = self.depth[x] + 1;
                // Tree arcs have zero reduced cost: c - pot[t] + pot[h] = 0.
                if t == y {
                    self.up[y] = true;
                    self.pot[y] = self.arc_cost(arc) + self.pot[x];
                } else {
                    self.up[y] = false;
                    self.pot[y] = self.pot[x] - self.arc_cost(arc);
                }
                stack.push(y);
            }
        }
    }

    /// Block-search pricing: the most negative reduced cost within the first
    /// block that contains a negative one.
    fn find_entering(&mut self) -> Option<usize> {
        let arcs = self.flow.len();
        let threshold = -PRICE_TOL * self.scale;
        let mut best = NONE;
        let mut best_rc = threshold;
        let mut seen_in_block = 0;
        let mut arc = self.next_arc;
        for _ in 0..arcs {
            if !self.in_tree[arc] {
                let rc = self.reduced_cost(arc);
                if rc < best_rc {
                    best_rc = rc;
                    best = arc;
                }
            }
            arc += 1;
            if arc == arcs {
                arc = 0;
            }
            seen_in_block += 1;
            if seen_in_block == self.block {
                if best != NONE {
                    self.next_arc = arc;
                    return Some(best);
                }
                seen_in_block = 0;
            }
        }
        if best != NONE {
            self.next_arc = arc;
            Some(best)
        } else {
            None
        }
    }

    fn run(&mut self) -> Result<usize> {
        let (n, m) = (self.n, self.m);
        // Generous cap; reaching it indicates a numerical breakdown.
        let cap = 50 * (n * m + n + m) + 1000;
        let mut pivots = 0;
        while let Some(entering) = self.find_entering() {
            self.pivot(entering);
            pivots += 1;
            if pivots > cap {
                return Err(Error::NotConverged {
                    residual: f64::NAN,
                    iterations: pivots,
                });
            }
        }
        let art: f64 = self.flow[n * m..].iter().sum();
        if art > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "transportation problem infeasible (artificial flow {art:e})"
            )));
        }
        Ok(pivots)
    }

    fn pivot(&mut self, entering: usize) {
        let (first, second) = self.ends(entering);
        // Join node.
        let (mut x, mut y) = (first, second);
        while x != y {
            if self.depth[x] >= self.depth[y] {
                x = self.parent[x];
            } else {
                y = self.parent[y];
            }
        }
        let join = x;

        // Cycle is oriented along the entering arc: join -> .. -> first ->
        // second -> .. -> join. Blocking arcs are the ones traversed against
        // their direction; the last one in cycle order leaves.
        let mut delta = f64::INFINITY;
        let mut leave_node = NONE;
        let mut v = first;
        while v != join {
            // From join down to `first`: an up arc (v -> parent) is traversed
            // backward.
            if self.up[v] {
                let d = self.flow[self.pred[v]];
                if d < delta {
                    delta = d;
                    leave_node = v;
                }
            }
            v = self.parent[v];
        }
        let mut v = second;
        while v != join {
            // From `second` up to join: a down arc (parent -> v) is traversed
            // backward.
            if !self.up[v] {
                let d = self.flow[self.pred[v]];
                if d <= delta {
                    delta = d;
                    leave_node = v;
                }
            }
            v = self.parent[v];
        }
        debug_assert!(
            leave_node != NONE,
            "uncapacitated cycle without blocking arc"
        );

        if delta > 0.0 {
            self.flow[entering] += delta;
            let mut v = first;
            while v != join {
                let a = self.pred[v];
                if self.up[v] {
                    self.flow[a] -= delta;
                } else {
                    self.flow[a] += delta;
                }
                v = self.parent[v];
            }
            let mut v = second;
            while v != join {
                let a = self.pred[v];
                if self.up[v] {
                    self.flow[a] += delta;
                } else {
                    self.flow[a] -= delta;
                }
                v = self.parent[v];
            }
        }
        let leaving = self.pred[leave_node];
        self.flow[leaving] = 0.0;

        self.in_tree[leaving] = false;
        let (lt, lh) = self.ends(leaving);
        for node in [lt, lh] {
            let list = &mut self.adj[node];
            let pos = list
                .iter()
                .position(|&a| a == leaving)
                .expect("leaving arc in tree");
            list.swap_remove(pos);
        }
        self.in_tree[entering] = true;
        self.adj[first].push(entering);
        self.adj[second].push(entering);
        self.rebuild_tree();
    }

    fn duals(&self) -> (Vec<f64>, Vec<f64>) {
        let f = self.pot[..self.n].to_vec();
        let g = self.pot[self.n..self.n + self.m]
            .iter()
            .map(|p| -p)
            .collect();
        (f, g)
    }

    fn plan(&self) -> Matrix {
        let nm = self.n * self.m;
        Matrix::from_vec(
            self.n,
            self.m,
            self.flow[..nm].iter().map(|&x| x.max(0.0)).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(c: Matrix, a: Vec<f64>, b: Vec<f64>) -> TransportSolution {
        solve_exact_lp(&CostMatrix::new(c, a, b).unwrap(), &SolverConfig::exact()).unwrap()
    }

    #[test]
    fn two_by_two_hand_case() {
        let sol = exact(
            Matrix::from_rows(&[[0.0, 2.0], [1.0, 1.0]]),
            vec![0.5; 2],
            vec![0.5; 2],
        );
        assert!((sol.objective - 0.5).abs() < 1e-12);
        assert!((sol.plan.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((sol.plan.get(1, 1) - 0.5).abs() < 1e-12);
        assert_eq!(sol.dual_g[1], 0.0);
    }

    #[test]
    fn single_cell() {
        let sol = exact(Matrix::from_rows(&[[2.5]]), vec![1.0], vec![1.0]);
        assert_eq!(sol.plan.get(0, 0), 1.0);
        assert_eq!(sol.objective, 2.5);
        assert_eq!(sol.dual_f[0] + sol.dual_g[0], 2.5);
    }

    #[test]
    fn duals_certify_optimality() {
        let c = Matrix::from_rows(&[
            [3.0, 1.0, 7.0, 4.0],
            [2.0, 6.0, 5.0, 9.0],
            [8.0, 3.0, 3.0, 2.0],
        ]);
        let a = vec![0.3, 0.25, 0.45];
        let b = vec![0.2, 0.2, 0.35, 0.25];
        let sol = exact(c.clone(), a.clone(), b.clone());
        assert!(sol.residual < 1e-12);
        assert!(sol.plan.count_nonzero(0.0) <= 3 + 4 - 1);
        for i in 0..3 {
            for j in 0..4 {
                let rc = c.get(i, j) - sol.dual_f[i] - sol.dual_g[j];
                assert!(rc >= -1e-9);
                if sol.plan.get(i, j) > 0.0 {
                    assert!(rc.abs() < 1e-9);
                }
            }
        }
        let dual_obj: f64 = sol.dual_f.iter().zip(&a).map(|(f, a)| f * a).sum::<f64>()
            + sol.dual_g.iter().zip(&b).map(|(g, b)| g * b).sum::<f64>();
        assert!((dual_obj - sol.objective).abs() < 1e-12);
    }

    #[test]
    fn zero_masses_are_allowed() {
        let c = Matrix::from_rows(&[[1.0, 2.0, 0.5], [2.0, 1.0, 0.5]]);
        let sol = exact(c, vec![0.5, 0.5], vec![0.5, 0.5, 0.0]);
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert_eq!(sol.plan.get(0, 2), 0.0);
    }

    #[test]
    fn size_limit() {
        let cost = CostMatrix::uniform(Matrix::zeros(1001, 1000)).unwrap();
        assert!(matches!(
            solve_exact_lp(&cost, &SolverConfig::exact()),
            Err(Error::InstanceTooLarge { .. })
        ));
    }
}
