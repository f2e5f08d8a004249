//! Exact discrete Monge–Kantorovich solver with dual potentials.

mod face;
mod simplex;

use alloc::format;
use alloc::vec::Vec;

use crate::cost::CostSpec;
use crate::math::dist;
use crate::measure::{AtomMeasure, DiscreteMeasure};
use crate::{Error, Result};

pub use face::{optimal_face_dimension, FaceReport, FACE_MAX_ATOMS};
pub(crate) use simplex::NetworkSimplex;

/// Relative optimality tolerance on reduced costs.
pub const OPT_TOL: f64 = 1e-10;
/// Relative tolerance on plan marginals.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Flows at or below this are treated as zero.
pub const FLOW_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// A coupling between two atom measures, stored as its positive entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    source: AtomMeasure,
    target: AtomMeasure,
    entries: Vec<PlanEntry>,
    cost: CostSpec,
    cost_value: f64,
}

impl TransportPlan {
    /// Checks the coupling constraints and evaluates the plan under `cost`.
    /// Restricted costs are evaluated as `alpha`, their value on the
    /// saturated pairs.
    pub fn new(source: AtomMeasure, target: AtomMeasure, mut entries: Vec<PlanEntry>, cost: CostSpec) -> Result<Self> {
        if source.dim() != target.dim() {
            return Err(Error::BadDimension(format!(
                "source dimension {} vs target dimension {}",
                source.dim(),
                target.dim()
            )));
        }
        let mut rows = alloc::vec![0.0; source.len()];
        let mut cols = alloc::vec![0.0; target.len()];
        for e in &entries {
            if e.source >= source.len() || e.target >= target.len() {
                return Err(Error::InvalidParameter(format!("entry ({}, {}) out of range", e.source, e.target)));
            }
            if !(e.mass > 0.0) || !e.mass.is_finite() {
                return Err(Error::InvalidParameter(format!("entry mass must be positive, got {}", e.mass)));
            }
            rows[e.source] += e.mass;
            cols[e.target] += e.mass;
        }
        check_marginal(&rows, source.masses(), "row")?;
        check_marginal(&cols, target.masses(), "column")?;
        entries.sort_by_key(|e| (e.source, e.target));
        let mut plan = Self { source, target, entries, cost, cost_value: 0.0 };
        plan.cost_value = plan.integral(&cost);
        Ok(plan)
    }

    pub fn source(&self) -> &AtomMeasure {
        &self.source
    }

    pub fn target(&self) -> &AtomMeasure {
        &self.target
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn cost(&self) -> &CostSpec {
        &self.cost
    }

    /// Value of the plan under the cost it was produced with.
    pub fn cost_value(&self) -> f64 {
        self.cost_value
    }

    /// `sum mass * c(x_i, y_j)` over the entries; restricted costs count as
    /// `alpha`.
    pub fn integral(&self, cost: &CostSpec) -> f64 {
        let cost = match cost {
            CostSpec::BetaRestricted { .. } => CostSpec::Alpha,
            c => *c,
        };
        self.entries
            .iter()
            .map(|e| {
                let c = cost
                    .eval(&self.source.points()[e.source], &self.target.points()[e.target], None)
                    .expect("plan points share a dimension");
                e.mass * c
            })
            .sum()
    }

    /// `int |x - y| dPi`.
    pub fn w1(&self) -> f64 {
        self.integral(&CostSpec::Distance)
    }

    /// `int alpha(x - y) dPi`.
    pub fn alpha_cost(&self) -> f64 {
        self.integral(&CostSpec::Alpha)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    /// Same entry pattern, masses within `tol` (absolute).
    pub fn same_as(&self, other: &Self, tol: f64) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.source == b.source && a.target == b.target && (a.mass - b.mass).abs() <= tol)
    }
}

fn check_marginal(got: &[f64], want: &[f64], what: &str) -> Result<()> {
    for (k, (g, w)) in got.iter().zip(want).enumerate() {
        if (g - w).abs() > MARGINAL_TOL * w + 1e-14 {
            return Err(Error::Infeasible(format!("{what} {k} carries {g}, marginal is {w}")));
        }
    }
    Ok(())
}

/// Dual values on the atoms, in the convention `u(x) - u(y) <= c(x, y)` with
/// equality on the plan's support and `u(first source) = 0`.
///
/// For the distance cost the two arrays are restrictions of one 1-Lipschitz
/// function on the pooled point set.
#[derive(Debug, Clone, PartialEq)]
pub struct KantorovichPotential {
    pub u_source: Vec<f64>,
    pub u_target: Vec<f64>,
}

impl KantorovichPotential {
    /// `(u(x_i), u(y_j))`.
    pub fn pair(&self, i: usize, j: usize) -> (f64, f64) {
        (self.u_source[i], self.u_target[j])
    }
}

/// Optimal plan, potential, and both objective values.
#[derive(Debug, Clone)]
pub struct Solution {
    pub plan: TransportPlan,
    pub potential: KantorovichPotential,
    pub primal_value: f64,
    pub dual_value: f64,
    pub pivots: usize,
}

/// Solves the transport problem for a cost that does not need a potential.
pub fn solve_exact(src: &DiscreteMeasure, tgt: &DiscreteMeasure, cost: &CostSpec) -> Result<Solution> {
    solve_exact_with(src, tgt, cost, None)
}

/// Solves the transport problem; `potential` feeds the restricted cost.
pub fn solve_exact_with(
    src: &DiscreteMeasure,
    tgt: &DiscreteMeasure,
    cost: &CostSpec,
    potential: Option<&KantorovichPotential>,
) -> Result<Solution> {
    solve_atoms(&src.to_atoms(), &tgt.to_atoms(), cost, potential)
}

pub(crate) fn cost_matrix(
    src: &AtomMeasure,
    tgt: &AtomMeasure,
    cost: &CostSpec,
    potential: Option<&KantorovichPotential>,
) -> Result<Vec<f64>> {
    if let Some(u) = potential {
        if u.u_source.len() != src.len() || u.u_target.len() != tgt.len() {
            return Err(Error::InvalidParameter("potential does not match the measures".into()));
        }
    }
    if cost.needs_potential() && potential.is_none() {
        return Err(Error::MissingPotential);
    }
    let mut out = Vec::with_capacity(src.len() * tgt.len());
    for (i, x) in src.points().iter().enumerate() {
        for (j, y) in tgt.points().iter().enumerate() {
            out.push(cost.eval(x, y, potential.map(|u| u.pair(i, j)))?);
        }
    }
    Ok(out)
}

pub(crate) fn solve_atoms(
    src: &AtomMeasure,
    tgt: &AtomMeasure,
    cost: &CostSpec,
    potential: Option<&KantorovichPotential>,
) -> Result<Solution> {
    cost.validate()?;
    if src.dim() != tgt.dim() {
        return Err(Error::BadDimension(format!("source dimension {} vs target dimension {}", src.dim(), tgt.dim())));
    }
    let mismatch = src.total_mass() - tgt.total_mass();
    if mismatch.abs() > MARGINAL_TOL {
        return Err(Error::Infeasible(format!("total masses differ by {mismatch:e}")));
    }
    let matrix = cost_matrix(src, tgt, cost, potential)?;
    solve_matrix(src, tgt, &matrix, *cost)
}

/// Solves with an explicit cost matrix (`+inf` marks forbidden pairs).
pub(crate) fn solve_matrix(src: &AtomMeasure, tgt: &AtomMeasure, matrix: &[f64], cost: CostSpec) -> Result<Solution> {
    let (m, n) = (src.len(), tgt.len());
    // Zero-mass atoms do not enter the network.
    let rows: Vec<usize> = (0..m).filter(|&i| src.masses()[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| tgt.masses()[j] > 0.0).collect();
    let supply: Vec<f64> = rows.iter().map(|&i| src.masses()[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| tgt.masses()[j]).collect();
    let reduced_matrix;
    let sub: &[f64] = if rows.len() == m && cols.len() == n {
        matrix
    } else {
        reduced_matrix = rows.iter().flat_map(|&i| cols.iter().map(move |&j| matrix[i * n + j])).collect::<Vec<_>>();
        &reduced_matrix
    };

    let (mm, nn) = (rows.len(), cols.len());
    let arcs = mm * nn;
    let max_pivots = 50 * arcs + 100_000;
    let sol = NetworkSimplex::new(&supply, &demand, sub, OPT_TOL)?.solve(max_pivots, MARGINAL_TOL, FLOW_FLOOR)?;

    let entries: Vec<PlanEntry> =
        sol.flows.iter().map(|&(i, j, mass)| PlanEntry { source: rows[i], target: cols[j], mass }).collect();
    let primal_value: f64 = entries.iter().map(|e| e.mass * matrix[e.source * n + e.target]).sum();

    // LP duals: u_i = -pi_i, v_j = pi_{m+j}, with u_i + v_j <= c_ij.
    let mut u = alloc::vec![f64::NAN; m];
    let mut v = alloc::vec![f64::NAN; n];
    for (k, &i) in rows.iter().enumerate() {
        u[i] = -sol.pi[k];
    }
    for (k, &j) in cols.iter().enumerate() {
        v[j] = sol.pi[mm + k];
    }
    let dual_value: f64 = rows.iter().map(|&i| src.masses()[i] * u[i]).sum::<f64>()
        + cols.iter().map(|&j| tgt.masses()[j] * v[j]).sum::<f64>();
    // c-transforms fill in the atoms that carried no mass.
    for j in 0..n {
        if v[j].is_nan() {
            v[j] = rows.iter().map(|&i| matrix[i * n + j] - u[i]).fold(f64::INFINITY, f64::min);
        }
    }
    for i in 0..m {
        if u[i].is_nan() {
            u[i] = (0..n).map(|j| matrix[i * n + j] - v[j]).fold(f64::INFINITY, f64::min);
        }
    }

    let potential = match cost {
        CostSpec::Distance => lipschitz_extension(src, tgt, &v),
        _ => {
            let shift = u[0];
            KantorovichPotential {
                u_source: u.iter().map(|x| x - shift).collect(),
                u_target: v.iter().map(|y| -y - shift).collect(),
            }
        }
    };
    if potential.u_source.iter().chain(&potential.u_target).any(|x| !x.is_finite()) {
        return Err(Error::NumericFailure("non-finite dual value".into()));
    }

    let plan = TransportPlan::new(src.clone(), tgt.clone(), entries, cost)?;
    Ok(Solution { plan, potential, primal_value, dual_value, pivots: sol.pivots })
}

/// `u(p) = min_j |p - y_j| - v_j` on sources and targets, shifted so the
/// first source sits at zero. It is 1-Lipschitz, agrees with the LP dual on
/// sources and saturates `u(x) - u(y) = |x - y|` on every tight pair.
fn lipschitz_extension(src: &AtomMeasure, tgt: &AtomMeasure, v: &[f64]) -> KantorovichPotential {
    let eval = |p: &[f64]| tgt.points().iter().zip(v).map(|(y, vj)| dist(p, y) - vj).fold(f64::INFINITY, f64::min);
    let mut u_source: Vec<f64> = src.points().iter().map(|p| eval(p)).collect();
    let mut u_target: Vec<f64> = tgt.points().iter().map(|p| eval(p)).collect();
    let shift = u_source[0];
    u_source.iter_mut().for_each(|x| *x -= shift);
    u_target.iter_mut().for_each(|x| *x -= shift);
    KantorovichPotential { u_source, u_target }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn line(points: &[f64]) -> DiscreteMeasure {
        AtomMeasure::uniform(points.iter().map(|x| vec![*x]).collect()).unwrap().into()
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let m = line(&[0.0, 1.0, 2.5]);
        let sol = solve_exact(&m, &m, &CostSpec::Distance).unwrap();
        assert_eq!(sol.primal_value, 0.0);
        let pairs: Vec<_> = sol.plan.entries().iter().map(|e| (e.source, e.target)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn book_shift_value_is_one() {
        let src = line(&[0.0, 1.0, 2.0, 3.0]);
        let tgt = line(&[1.0, 2.0, 3.0, 4.0]);
        let sol = solve_exact(&src, &tgt, &CostSpec::Distance).unwrap();
        approx::assert_abs_diff_eq!(sol.primal_value, 1.0, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(sol.dual_value, 1.0, epsilon = 1e-12);
        // Slackness and 1-Lipschitz on the pooled points.
        let u = &sol.potential;
        for e in sol.plan.entries() {
            let d = (src.to_atoms().points()[e.source][0] - tgt.to_atoms().points()[e.target][0]).abs();
            approx::assert_abs_diff_eq!(u.u_source[e.source] - u.u_target[e.target], d, epsilon = 1e-9);
        }
        assert_eq!(u.u_source[0], 0.0);
    }

    #[test]
    fn two_point_identity() {
        let m = line(&[-1.0, 1.0]);
        let sol = solve_exact(&m, &m, &CostSpec::Distance).unwrap();
        assert_eq!(sol.plan.entries().len(), 2);
        assert!(sol.plan.entries().iter().all(|e| e.source == e.target && e.mass == 0.5));
    }

    #[test]
    fn mass_mismatch_is_infeasible() {
        let a = AtomMeasure::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let b = AtomMeasure::new(vec![vec![0.0], vec![1.0, 0.0]], vec![0.5, 0.5]);
        assert!(b.is_err());
        let b = AtomMeasure::new(vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
        assert!(matches!(solve_exact(&a.into(), &b.into(), &CostSpec::Distance), Err(Error::BadDimension(_))));
    }

    #[test]
    fn restricted_cost_requires_potential() {
        let m = line(&[0.0, 1.0]);
        assert_eq!(solve_exact(&m, &m, &CostSpec::beta_restricted()).unwrap_err(), Error::MissingPotential);
    }

    #[test]
    fn zero_mass_atoms_get_potentials() {
        let src = AtomMeasure::new(vec![vec![0.0], vec![5.0]], vec![1.0, 0.0]).unwrap();
        let tgt = AtomMeasure::new(vec![vec![2.0], vec![-3.0]], vec![1.0, 0.0]).unwrap();
        let sol = solve_exact(&src.into(), &tgt.into(), &CostSpec::Distance).unwrap();
        assert_eq!(sol.plan.entries(), &[PlanEntry { source: 0, target: 0, mass: 1.0 }]);
        assert!(sol.potential.u_source.iter().all(|x| x.is_finite()));
        assert!(sol.potential.u_target.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn plan_validation() {
        let a = AtomMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let bad = vec![PlanEntry { source: 0, target: 0, mass: 0.5 }];
        assert!(TransportPlan::new(a.clone(), a.clone(), bad, CostSpec::Distance).is_err());
        let neg = vec![
            PlanEntry { source: 0, target: 0, mass: 0.6 },
            PlanEntry { source: 1, target: 1, mass: 0.5 },
            PlanEntry { source: 0, target: 1, mass: -0.1 },
        ];
        assert!(TransportPlan::new(a.clone(), a, neg, CostSpec::Distance).is_err());
    }
}
