//! Dimension of the set of optimal plans.
//!
//! With `(u, v)` an optimal dual, a feasible plan is optimal iff it lives on
//! the tight pairs `c_ij = u_i + v_j`. The optimal face is therefore the
//! transportation polytope restricted to those pairs. Its affine hull is
//! spanned by the pairs that some optimal vertex uses; each such pair is
//! found by maximizing its mass over the face. The dimension is the number
//! of usable pairs minus the rank of the marginal constraints on them,
//! `nodes - components` of the bipartite support graph.

use alloc::format;
use alloc::vec::Vec;

use super::{cost_matrix, solve_matrix, PlanEntry};
use crate::cost::CostSpec;
use crate::measure::DiscreteMeasure;
use crate::{Error, Result};

/// Largest atom count per side accepted by [`optimal_face_dimension`].
pub const FACE_MAX_ATOMS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct FaceReport {
    /// 0 when the optimal plan is unique.
    pub dimension: usize,
    pub optimal_value: f64,
    /// Pairs with zero reduced cost.
    pub tight_pairs: usize,
    /// Pairs that carry mass in at least one optimal plan.
    pub usable_pairs: Vec<(usize, usize)>,
    /// Distinct optimal vertices met while probing the face.
    pub vertices: Vec<Vec<PlanEntry>>,
}

pub fn optimal_face_dimension(
    src: &DiscreteMeasure,
    tgt: &DiscreteMeasure,
    cost: &CostSpec,
    tol: f64,
) -> Result<FaceReport> {
    let (a, b) = (src.to_atoms(), tgt.to_atoms());
    if a.len() > FACE_MAX_ATOMS || b.len() > FACE_MAX_ATOMS {
        return Err(Error::TooLarge(format!(
            "{} x {} atoms, face enumeration handles at most {FACE_MAX_ATOMS} per side",
            a.len(),
            b.len()
        )));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be nonnegative, got {tol}")));
    }
    let sol = super::solve_atoms(&a, &b, cost, None)?;
    let matrix = cost_matrix(&a, &b, cost, None)?;
    let (m, n) = (a.len(), b.len());
    let scale = matrix.iter().filter(|c| c.is_finite()).fold(1f64, |s, c| s.max(c.abs()));
    let u = &sol.potential;

    let mut tight = alloc::vec![false; m * n];
    for i in 0..m {
        for j in 0..n {
            let slack = matrix[i * n + j] - (u.u_source[i] - u.u_target[j]);
            tight[i * n + j] = a.masses()[i] > 0.0 && b.masses()[j] > 0.0 && slack <= tol * scale;
        }
    }

    let mut usable = alloc::vec![false; m * n];
    let mut vertices: Vec<Vec<PlanEntry>> = Vec::new();
    let mut record = |entries: &[PlanEntry], usable: &mut [bool]| {
        for e in entries {
            usable[e.source * n + e.target] = true;
        }
        if !vertices.iter().any(|v| v.as_slice() == entries) {
            vertices.push(entries.to_vec());
        }
    };
    record(sol.plan.entries(), &mut usable);

    for probe in 0..m * n {
        if !tight[probe] || usable[probe] {
            continue;
        }
        let probe_costs: Vec<f64> = (0..m * n)
            .map(|e| match (tight[e], e == probe) {
                (true, true) => -1.0,
                (true, false) => 0.0,
                (false, _) => f64::INFINITY,
            })
            .collect();
        let v = solve_matrix(&a, &b, &probe_costs, *cost)?;
        record(v.plan.entries(), &mut usable);
    }

    let usable_pairs: Vec<(usize, usize)> = (0..m * n).filter(|&e| usable[e]).map(|e| (e / n, e % n)).collect();

    // Union-find over the m + n nodes.
    let mut parent: Vec<usize> = (0..m + n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(i, j) in &usable_pairs {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, m + j));
        if ri != rj {
            parent[ri] = rj;
        }
    }
    let active: Vec<usize> =
        (0..m).filter(|&i| a.masses()[i] > 0.0).chain((0..n).filter(|&j| b.masses()[j] > 0.0).map(|j| m + j)).collect();
    let mut roots: Vec<usize> = active.iter().map(|&x| find(&mut parent, x)).collect();
    roots.sort_unstable();
    roots.dedup();
    let rank = active.len() - roots.len();

    Ok(FaceReport {
        dimension: usable_pairs.len() - rank,
        optimal_value: sol.primal_value,
        tight_pairs: tight.iter().filter(|t| **t).count(),
        usable_pairs,
        vertices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::AtomMeasure;
    use alloc::vec;

    fn line(points: &[f64]) -> DiscreteMeasure {
        AtomMeasure::uniform(points.iter().map(|x| vec![*x]).collect()).unwrap().into()
    }

    #[test]
    fn book_shift_face_is_degenerate() {
        let r = optimal_face_dimension(
            &line(&[0.0, 1.0, 2.0, 3.0]),
            &line(&[1.0, 2.0, 3.0, 4.0]),
            &CostSpec::Distance,
            1e-9,
        )
        .unwrap();
        assert!(r.dimension >= 1);
        assert!(r.vertices.len() >= 2);
        // Only rightward moves are optimal.
        assert!(r.usable_pairs.iter().all(|&(i, j)| j + 1 >= i));
    }

    #[test]
    fn identity_face_is_a_point() {
        let m = line(&[0.0, 1.0, 3.0]);
        let r = optimal_face_dimension(&m, &m, &CostSpec::Distance, 1e-9).unwrap();
        assert_eq!(r.dimension, 0);
        assert_eq!(r.vertices.len(), 1);
    }

    #[test]
    fn too_large() {
        let m = line(&(0..13).map(|x| x as f64).collect::<Vec<_>>());
        assert!(matches!(optimal_face_dimension(&m, &m, &CostSpec::Distance, 1e-9), Err(Error::TooLarge(_))));
    }
}
