//! Primal network simplex for the uncapacitated transportation problem.
//!
//! Sources `0..m` ship to targets `m..m+n` along a dense arc set (arc
//! `i * n + j`); arcs with infinite cost are absent. An artificial root is
//! joined to every node so the initial spanning tree is strongly feasible,
//! and the leaving-arc rule keeps it that way, which rules out cycling on
//! degenerate instances. Entering arcs come from a deterministic block
//! search over the arc list.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::{Error, Result};

const NONE: usize = usize::MAX;

/// Optimal flow and node potentials.
#[derive(Debug, Clone)]
pub(crate) struct FlowSolution {
    /// `(source, target, flow)` over tree arcs with positive flow.
    pub flows: Vec<(usize, usize, f64)>,
    /// Node potentials with reduced cost `c_ij + pi_i - pi_{m+j} >= -tol`.
    pub pi: Vec<f64>,
    pub pivots: usize,
}

pub(crate) struct NetworkSimplex<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    art_cost: f64,
    tol: f64,

    parent: Vec<usize>,
    pred: Vec<usize>,
    up: Vec<bool>,
    flow: Vec<f64>,
    depth: Vec<u32>,
    pi: Vec<f64>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,

    block: usize,
    next_arc: usize,
    stack: Vec<usize>,
}

impl<'a> NetworkSimplex<'a> {
    /// `cost` is row-major `m x n`; `rel_tol` scales the entering threshold
    /// by the largest finite cost magnitude.
    pub fn new(supply: &[f64], demand: &[f64], cost: &'a [f64], rel_tol: f64) -> Result<Self> {
        let (m, n) = (supply.len(), demand.len());
        if m == 0 || n == 0 || cost.len() != m * n {
            return Err(Error::InvalidParameter("cost matrix does not match the marginals".into()));
        }
        let mut max_cost = 0f64;
        for c in cost {
            if c.is_nan() || *c == f64::NEG_INFINITY {
                return Err(Error::NumericFailure("cost matrix contains NaN or -inf".into()));
            }
            if c.is_finite() {
                max_cost = max_cost.max(c.abs());
            }
        }
        let nodes = m + n + 1;
        let root = m + n;
        let art_cost = (max_cost + 1.0) * nodes as f64;
        let tol = rel_tol * max_cost.max(f64::MIN_POSITIVE);
        let arcs = m * n;

        let mut s = Self {
            m,
            n,
            cost,
            art_cost,
            tol,
            parent: vec![root; nodes],
            pred: (0..nodes).map(|v| arcs + v).collect(),
            up: vec![true; nodes],
            flow: vec![0.0; nodes],
            depth: vec![1; nodes],
            pi: vec![0.0; nodes],
            first_child: vec![NONE; nodes],
            next_sib: vec![NONE; nodes],
            prev_sib: vec![NONE; nodes],
            block: ((sqrt(arcs as f64) as usize).max(10)).min(arcs.max(1)),
            next_arc: 0,
            stack: Vec::new(),
        };
        s.parent[root] = NONE;
        s.depth[root] = 0;
        for (i, a) in supply.iter().enumerate() {
            s.flow[i] = *a;
        }
        for (j, b) in demand.iter().enumerate() {
            let v = m + j;
            s.up[v] = false;
            s.flow[v] = *b;
            s.pi[v] = art_cost;
        }
        for v in (0..root).rev() {
            s.add_child(root, v);
        }
        Ok(s)
    }

    #[inline]
    fn arc_cost(&self, e: usize) -> f64 {
        let arcs = self.m * self.n;
        if e < arcs {
            self.cost[e]
        } else if e - arcs < self.m {
            0.0
        } else {
            self.art_cost
        }
    }

    fn add_child(&mut self, p: usize, c: usize) {
        let head = self.first_child[p];
        self.next_sib[c] = head;
        self.prev_sib[c] = NONE;
        if head != NONE {
            self.prev_sib[head] = c;
        }
        self.first_child[p] = c;
    }

    fn remove_child(&mut self, p: usize, c: usize) {
        let (prev, next) = (self.prev_sib[c], self.next_sib[c]);
        if prev == NONE {
            self.first_child[p] = next;
        } else {
            self.next_sib[prev] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
        self.prev_sib[c] = NONE;
        self.next_sib[c] = NONE;
    }

    /// Block search: scan `block` arcs at a time starting after the last
    /// entering arc; stop at the end of the first block holding a violation.
    fn find_entering(&mut self) -> Option<usize> {
        let arcs = self.m * self.n;
        let n = self.n;
        let mut best = NONE;
        let mut min = -self.tol;
        let mut count = self.block;
        let mut e = self.next_arc;
        let (mut i, mut j) = (e / n, e % n);
        for _ in 0..arcs {
            let rc = self.cost[e] + self.pi[i] - self.pi[self.m + j];
            if rc < min {
                min = rc;
                best = e;
            }
            e += 1;
            j += 1;
            if j == n {
                j = 0;
                i += 1;
                if e == arcs {
                    e = 0;
                    i = 0;
                }
            }
            count -= 1;
            if count == 0 {
                if best != NONE {
                    break;
                }
                count = self.block;
            }
        }
        if best != NONE {
            self.next_arc = e;
        }
        (best != NONE).then_some(best)
    }

    fn join(&self, mut a: usize, mut b: usize) -> usize {
        while a != b {
            match self.depth[a].cmp(&self.depth[b]) {
                core::cmp::Ordering::Greater => a = self.parent[a],
                core::cmp::Ordering::Less => b = self.parent[b],
                core::cmp::Ordering::Equal => {
                    a = self.parent[a];
                    b = self.parent[b];
                }
            }
        }
        a
    }

    fn pivot(&mut self, entering: usize) -> Result<()> {
        let s = entering / self.n;
        let t = self.m + entering % self.n;
        let join = self.join(s, t);

        // Flow is pushed s -> t, up from t to the join, down from the join
        // to s. Pick the last blocking arc in that orientation.
        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut on_first = true;
        let mut u = s;
        while u != join {
            if self.up[u] && self.flow[u] < delta {
                delta = self.flow[u];
                u_out = u;
            }
            u = self.parent[u];
        }
        u = t;
        while u != join {
            if !self.up[u] && self.flow[u] <= delta {
                delta = self.flow[u];
                u_out = u;
                on_first = false;
            }
            u = self.parent[u];
        }
        if u_out == NONE {
            return Err(Error::Unbounded);
        }

        if delta > 0.0 {
            let mut u = s;
            while u != join {
                if self.up[u] {
                    self.flow[u] -= delta;
                } else {
                    self.flow[u] += delta;
                }
                u = self.parent[u];
            }
            u = t;
            while u != join {
                if self.up[u] {
                    self.flow[u] += delta;
                } else {
                    self.flow[u] -= delta;
                }
                u = self.parent[u];
            }
        }

        let (u_in, v_in) = if on_first { (s, t) } else { (t, s) };
        let old_parent = self.parent[u_out];
        self.remove_child(old_parent, u_out);

        // Re-hang the path u_in .. u_out below v_in, reversing it.
        let mut child = u_in;
        let mut new_parent = v_in;
        let mut new_arc = entering;
        let mut new_up = u_in == s;
        let mut new_flow = delta;
        loop {
            let next = self.parent[child];
            let (old_arc, old_up, old_flow) = (self.pred[child], self.up[child], self.flow[child]);
            if child != u_out {
                self.remove_child(next, child);
            }
            self.parent[child] = new_parent;
            self.pred[child] = new_arc;
            self.up[child] = new_up;
            self.flow[child] = new_flow;
            self.add_child(new_parent, child);
            if child == u_out {
                break;
            }
            new_parent = child;
            new_arc = old_arc;
            new_up = !old_up;
            new_flow = old_flow;
            child = next;
        }

        // Depths and potentials below u_in.
        self.stack.clear();
        self.stack.push(u_in);
        while let Some(v) = self.stack.pop() {
            let p = self.parent[v];
            self.depth[v] = self.depth[p] + 1;
            let c = self.arc_cost(self.pred[v]);
            self.pi[v] = if self.up[v] { self.pi[p] - c } else { self.pi[p] + c };
            let mut c = self.first_child[v];
            while c != NONE {
                self.stack.push(c);
                c = self.next_sib[c];
            }
        }
        Ok(())
    }

    pub fn solve(mut self, max_pivots: usize, feas_tol: f64, flow_floor: f64) -> Result<FlowSolution> {
        let mut pivots = 0;
        while let Some(e) = self.find_entering() {
            self.pivot(e)?;
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::NumericFailure("pivot limit exceeded".into()));
            }
        }
        let arcs = self.m * self.n;
        let root = self.m + self.n;
        let residual: f64 = (0..root).filter(|&v| self.pred[v] >= arcs).map(|v| self.flow[v]).sum();
        if residual > feas_tol {
            return Err(Error::Infeasible(alloc::format!(
                "{residual:e} units of mass cannot be routed over the allowed arcs"
            )));
        }
        let mut flows: Vec<(usize, usize, f64)> = (0..root)
            .filter(|&v| self.pred[v] < arcs && self.flow[v] > flow_floor)
            .map(|v| {
                let e = self.pred[v];
                (e / self.n, e % self.n, self.flow[v])
            })
            .collect();
        flows.sort_by_key(|f| (f.0, f.1));
        if flows.iter().any(|f| !f.2.is_finite()) {
            return Err(Error::NumericFailure("non-finite flow".into()));
        }
        self.pi.truncate(root);
        Ok(FlowSolution { flows, pi: self.pi, pivots })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(a: &[f64], b: &[f64], c: &[f64]) -> Result<FlowSolution> {
        NetworkSimplex::new(a, b, c, 1e-10)?.solve(1_000_000, 1e-9, 0.0)
    }

    fn value(sol: &FlowSolution, c: &[f64], n: usize) -> f64 {
        sol.flows.iter().map(|(i, j, f)| f * c[i * n + j]).sum()
    }

    #[test]
    fn two_by_two_prefers_diagonal() {
        let sol = run(&[0.5, 0.5], &[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(sol.flows, vec![(0, 0, 0.5), (1, 1, 0.5)]);
    }

    #[test]
    fn excluded_arcs_make_it_infeasible() {
        let inf = f64::INFINITY;
        let err = run(&[0.5, 0.5], &[0.5, 0.5], &[0.0, inf, 0.0, inf]).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn potentials_are_dual_feasible_and_tight() {
        let a = [0.2, 0.3, 0.5];
        let b = [0.4, 0.1, 0.25, 0.25];
        let c = [3.0, 1.0, 4.0, 1.5, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0];
        let sol = run(&a, &b, &c).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let rc = c[i * 4 + j] + sol.pi[i] - sol.pi[3 + j];
                assert!(rc >= -1e-9, "reduced cost {rc} at ({i},{j})");
            }
        }
        for (i, j, _) in &sol.flows {
            let rc = c[i * 4 + j] + sol.pi[*i] - sol.pi[3 + j];
            assert!(rc.abs() < 1e-9);
        }
        let dual: f64 = a.iter().enumerate().map(|(i, x)| -x * sol.pi[i]).sum::<f64>()
            + b.iter().enumerate().map(|(j, y)| y * sol.pi[3 + j]).sum::<f64>();
        assert!((dual - value(&sol, &c, 4)).abs() < 1e-9);
    }

    #[test]
    fn degenerate_assignment_terminates() {
        // Uniform marginals: every basis is highly degenerate.
        let n = 12;
        let a = vec![1.0 / n as f64; n];
        let c: Vec<f64> = (0..n * n).map(|e| (((e * 7919) % 13) as f64).abs()).collect();
        let sol = run(&a, &a, &c).unwrap();
        let mut rows = vec![0.0; n];
        for (i, _, f) in &sol.flows {
            rows[*i] += f;
        }
        for r in rows {
            assert!((r - 1.0 / n as f64).abs() < 1e-12);
        }
    }
}
