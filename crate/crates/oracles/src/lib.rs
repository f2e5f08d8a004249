//! Brute-force reference computations for small transportation problems.
//!
//! Nothing here shares code with the solver under test: vertices of the
//! transportation polytope are enumerated by walking the graph of feasible
//! bases with ratio-test pivots.

use std::collections::{HashSet, VecDeque};

/// Tolerance for calling a basic flow nonnegative, relative to total mass.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// A basic feasible solution: arcs `i * n + j` in the basis and the dense
/// flow matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub basis: u64,
    pub flow: Vec<f64>,
}

/// Solves the tree system for basis `mask`. Returns `None` if the arcs do
/// not form a spanning tree.
pub fn basic_flow(supply: &[f64], demand: &[f64], mask: u64) -> Option<Vec<f64>> {
    let (m, n) = (supply.len(), demand.len());
    let arcs: Vec<(usize, usize)> = (0..m * n).filter(|e| mask >> e & 1 == 1).map(|e| (e / n, e % n)).collect();
    if arcs.len() != m + n - 1 {
        return None;
    }
    // Nodes: sources 0..m, targets m..m+n. Residual is signed supply.
    let mut residual: Vec<f64> = supply.iter().copied().chain(demand.iter().map(|d| -d)).collect();
    let mut degree = vec![0usize; m + n];
    for &(i, j) in &arcs {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut used = vec![false; arcs.len()];
    let mut flow = vec![0.0; m * n];
    let mut queue: VecDeque<usize> = (0..m + n).filter(|&v| degree[v] == 1).collect();
    let mut assigned = 0;
    while let Some(v) = queue.pop_front() {
        if degree[v] != 1 {
            continue;
        }
        let Some(k) = (0..arcs.len()).find(|&k| !used[k] && (arcs[k].0 == v || m + arcs[k].1 == v)) else {
            continue;
        };
        used[k] = true;
        assigned += 1;
        let (i, j) = arcs[k];
        let other = if v == i { m + j } else { i };
        // Flow runs from source to target.
        let f = if v == i { residual[v] } else { -residual[v] };
        flow[i * n + j] = f;
        residual[v] = 0.0;
        if v == i {
            residual[other] += f;
        } else {
            residual[other] -= f;
        }
        degree[v] -= 1;
        degree[other] -= 1;
        if degree[other] == 1 {
            queue.push_back(other);
        }
    }
    if assigned != arcs.len() {
        return None;
    }
    Some(flow)
}

/// North-west corner basis.
fn initial_basis(supply: &[f64], demand: &[f64]) -> u64 {
    let (m, n) = (supply.len(), demand.len());
    let (mut a, mut b) = (supply.to_vec(), demand.to_vec());
    let (mut i, mut j) = (0, 0);
    let mut mask = 0u64;
    loop {
        mask |= 1 << (i * n + j);
        if i == m - 1 && j == n - 1 {
            break;
        }
        let f = a[i].min(b[j]);
        a[i] -= f;
        b[j] -= f;
        if (a[i] <= b[j] && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    mask
}

/// Every basic feasible solution of `{P >= 0 : P 1 = supply, P^T 1 = demand}`.
///
/// Panics unless `m * n <= 64` and the totals agree.
pub fn enumerate_vertices(supply: &[f64], demand: &[f64]) -> Vec<Vertex> {
    let mut out = Vec::new();
    for_each_vertex(supply, demand, |basis, flow| out.push(Vertex { basis, flow: flow.to_vec() }));
    out
}

/// Walks the graph of feasible bases from the north-west corner basis,
/// pivoting every nonbasic arc in with a ratio test (all tied leaving arcs
/// are followed). Calls `visit` once per feasible basis with its dense
/// flow and returns the number of bases.
pub fn for_each_vertex(supply: &[f64], demand: &[f64], mut visit: impl FnMut(u64, &[f64])) -> usize {
    let (m, n) = (supply.len(), demand.len());
    assert!(m > 0 && n > 0 && m * n <= 64, "instance too large for enumeration");
    let total: f64 = supply.iter().sum();
    let other: f64 = demand.iter().sum();
    assert!((total - other).abs() <= 1e-12 * total.max(1.0), "unbalanced instance");
    let tie = FEASIBILITY_TOL * total.max(1.0);
    let nodes = m + n;

    let start = initial_basis(supply, demand);
    let mut seen = HashSet::from([start]);
    let mut stack = vec![start];
    let mut tree = Tree::new(nodes);
    let mut flow = vec![0.0; m * n];
    let mut minus: Vec<(usize, f64)> = Vec::with_capacity(nodes);
    while let Some(mask) = stack.pop() {
        tree.build(mask, supply, demand, &mut flow);
        visit(mask, &flow);
        for enter in (0..m * n).filter(|e| mask >> e & 1 == 0) {
            // Cycle: enter (+), then the tree path from target back to source,
            // whose arcs at even distance from either end carry the minus sign.
            let (mut x, mut y) = (enter / n, m + enter % n);
            let (mut kx, mut ky) = (0usize, 0usize);
            minus.clear();
            while x != y {
                if tree.depth[x] >= tree.depth[y] {
                    if kx % 2 == 0 {
                        minus.push((tree.parent_arc[x], flow[tree.parent_arc[x]]));
                    }
                    kx += 1;
                    x = tree.parent[x];
                } else {
                    if ky % 2 == 0 {
                        minus.push((tree.parent_arc[y], flow[tree.parent_arc[y]]));
                    }
                    ky += 1;
                    y = tree.parent[y];
                }
            }
            let theta = minus.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            for &(leave, f) in &minus {
                if f <= theta + tie {
                    let next = (mask | 1 << enter) & !(1 << leave);
                    if seen.insert(next) {
                        stack.push(next);
                    }
                }
            }
        }
    }
    seen.len()
}

/// Spanning tree of a basis rooted at source 0.
struct Tree {
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    adj: Vec<Vec<(usize, usize)>>,
    order: Vec<usize>,
}

impl Tree {
    fn new(nodes: usize) -> Self {
        Self {
            parent: vec![0; nodes],
            parent_arc: vec![0; nodes],
            depth: vec![0; nodes],
            adj: vec![Vec::new(); nodes],
            order: Vec::with_capacity(nodes),
        }
    }

    fn build(&mut self, mask: u64, supply: &[f64], demand: &[f64], flow: &mut [f64]) {
        let (m, n) = (supply.len(), demand.len());
        self.adj.iter_mut().for_each(Vec::clear);
        let mut bits = mask;
        while bits != 0 {
            let e = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let (i, j) = (e / n, m + e % n);
            self.adj[i].push((j, e));
            self.adj[j].push((i, e));
        }
        self.order.clear();
        self.order.push(0);
        self.parent[0] = usize::MAX;
        self.depth[0] = 0;
        let mut k = 0;
        while k < self.order.len() {
            let v = self.order[k];
            k += 1;
            for idx in 0..self.adj[v].len() {
                let (w, e) = self.adj[v][idx];
                if self.order.contains(&w) {
                    continue;
                }
                self.parent[w] = v;
                self.parent_arc[w] = e;
                self.depth[w] = self.depth[v] + 1;
                self.order.push(w);
            }
        }
        assert_eq!(self.order.len(), m + n, "basis is not a spanning tree");
        flow.iter_mut().for_each(|f| *f = 0.0);
        // Subtree net supply, children before parents.
        let mut net: Vec<f64> = supply.iter().copied().chain(demand.iter().map(|d| -d)).collect();
        for &v in self.order[1..].iter().rev() {
            let e = self.parent_arc[v];
            flow[e] = if v < m { net[v] } else { -net[v] };
            let p = self.parent[v];
            net[p] += net[v];
        }
    }
}

/// `sum cost * flow`.
pub fn objective(cost: &[f64], flow: &[f64]) -> f64 {
    cost.iter().zip(flow).map(|(c, f)| c * f).sum()
}

/// Smallest objective over `vertices`.
pub fn min_over_vertices(vertices: &[Vertex], cost: &[f64]) -> f64 {
    vertices.iter().map(|v| objective(cost, &v.flow)).fold(f64::INFINITY, f64::min)
}

/// Minimizes `second` among vertices whose `first` objective is within
/// `tol` of its minimum. Returns `(min first, min second on that face)`.
pub fn lexicographic_min(vertices: &[Vertex], first: &[f64], second: &[f64], tol: f64) -> (f64, f64) {
    let best = min_over_vertices(vertices, first);
    let second_best = vertices
        .iter()
        .filter(|v| objective(first, &v.flow) <= best + tol)
        .map(|v| objective(second, &v.flow))
        .fold(f64::INFINITY, f64::min);
    (best, second_best)
}

/// Smallest objective for each cost over all vertices, streamed. Also
/// returns the number of bases visited.
pub fn vertex_minima(supply: &[f64], demand: &[f64], costs: &[&[f64]]) -> (Vec<f64>, usize) {
    let mut best = vec![f64::INFINITY; costs.len()];
    let count = for_each_vertex(supply, demand, |_, flow| {
        for (b, c) in best.iter_mut().zip(costs) {
            *b = b.min(objective(c, flow));
        }
    });
    (best, count)
}

/// Streaming form of [`lexicographic_min`].
pub fn lexicographic_minimum(supply: &[f64], demand: &[f64], first: &[f64], second: &[f64], tol: f64) -> (f64, f64) {
    let mut values = Vec::new();
    for_each_vertex(supply, demand, |_, flow| values.push((objective(first, flow), objective(second, flow))));
    let best = values.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    let second_best = values.iter().filter(|v| v.0 <= best + tol).map(|v| v.1).fold(f64::INFINITY, f64::min);
    (best, second_best)
}

/// Cheapest permutation `sigma` for a square cost matrix, with its cost.
/// Ties go to the lexicographically first permutation.
pub fn best_permutation(cost: &[f64], n: usize) -> (Vec<usize>, f64) {
    assert!(n <= 9 && cost.len() == n * n, "permutation search is limited to 9 atoms");
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = (perm.clone(), f64::INFINITY);
    loop {
        let value: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
        if value < best.1 {
            best = (perm.clone(), value);
        }
        if !next_permutation(&mut perm) {
            return best;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
