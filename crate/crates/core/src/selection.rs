//! Second-variational selection among the optimal plans of the distance
//! cost.
//!
//! Two routes reach the same plan. The epsilon ladder solves the perturbed
//! problems `min int |x-y| + eps * alpha(x-y) dPi` for decreasing `eps` and
//! reads off the plan once it stops changing. The two-stage oracle solves
//! the distance problem, then minimizes `int alpha dPi` over the optimal
//! face. A [`SelectionCertificate`] compares the two.

use alloc::format;
use alloc::vec::Vec;

use libm::{floor, log10, pow};

use crate::cost::CostSpec;
use crate::math::dist;
use crate::measure::{AtomMeasure, DiscreteMeasure};
use crate::transport::{solve_atoms, KantorovichPotential, Solution, TransportPlan};
use crate::{Error, Result};

/// Relative width of the optimal face accepted by stage two.
pub const DEFAULT_FACE_TOL: f64 = 1e-9;
/// Mass tolerance for declaring two consecutive rungs identical.
pub const STABILITY_TOL: f64 = 1e-9;
/// Tolerance of the limit inequalities in a certificate.
pub const CERTIFICATE_TOL: f64 = 1e-6;

/// `start, ..., end` with `per_decade` geometric steps per factor of ten.
pub fn geometric_ladder(start: f64, end: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(start > end && end > 0.0) || !start.is_finite() || per_decade == 0 {
        return Err(Error::InvalidParameter(format!(
            "need start > end > 0 and at least one step per decade, got {start}, {end}, {per_decade}"
        )));
    }
    let steps = log10(start / end) * per_decade as f64;
    let count = floor(steps + 1e-9) as usize;
    let top = log10(start);
    let mut out: Vec<f64> =
        (0..=count).map(|k| if k == 0 { start } else { pow(10.0, top - k as f64 / per_decade as f64) }).collect();
    if (steps - count as f64).abs() <= 1e-9 {
        *out.last_mut().unwrap() = end;
    } else {
        out.push(end);
    }
    Ok(out)
}

/// `1e-1, 10^-1.5, ..., 1e-4`.
pub fn default_ladder() -> Vec<f64> {
    geometric_ladder(1e-1, 1e-4, 2).expect("valid default ladder")
}

/// Optimal plans of the perturbed problems along a decreasing `eps` ladder.
#[derive(Debug, Clone)]
pub struct EpsilonLadder {
    pub epsilons: Vec<f64>,
    pub plans: Vec<TransportPlan>,
    /// `int |x - y| dPi_eps`
    pub w1_values: Vec<f64>,
    /// `int alpha(x - y) dPi_eps`
    pub alpha_values: Vec<f64>,
}

impl EpsilonLadder {
    /// Last two rungs share their entries, masses within [`STABILITY_TOL`].
    pub fn is_stabilized(&self) -> bool {
        match self.plans.as_slice() {
            [.., a, b] => a.same_as(b, STABILITY_TOL),
            _ => false,
        }
    }

    /// The last plan, if the ladder stabilized.
    pub fn limit(&self) -> Option<&TransportPlan> {
        self.is_stabilized().then(|| self.plans.last().unwrap())
    }

    /// Worst violations of "distance part nonincreasing, alpha part
    /// nondecreasing" as `eps` decreases. Both are `<= 0` up to rounding.
    pub fn monotonicity_violation(&self) -> (f64, f64) {
        let w1 = self.w1_values.windows(2).map(|w| w[1] - w[0]).fold(0f64, f64::max);
        let alpha = self.alpha_values.windows(2).map(|w| w[0] - w[1]).fold(0f64, f64::max);
        (w1, alpha)
    }
}

fn check_ladder(epsilons: &[f64]) -> Result<()> {
    if epsilons.is_empty() {
        return Err(Error::InvalidParameter("empty epsilon ladder".into()));
    }
    if epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidParameter("epsilons must be positive".into()));
    }
    if epsilons.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidParameter("epsilons must decrease strictly".into()));
    }
    Ok(())
}

/// Solves the perturbed problem at every rung.
pub fn run_ladder(src: &DiscreteMeasure, tgt: &DiscreteMeasure, epsilons: &[f64]) -> Result<EpsilonLadder> {
    check_ladder(epsilons)?;
    let (a, b) = (src.to_atoms(), tgt.to_atoms());
    let mut ladder = EpsilonLadder {
        epsilons: epsilons.to_vec(),
        plans: Vec::with_capacity(epsilons.len()),
        w1_values: Vec::with_capacity(epsilons.len()),
        alpha_values: Vec::with_capacity(epsilons.len()),
    };
    for &eps in epsilons {
        let sol = solve_atoms(&a, &b, &CostSpec::c_epsilon(eps)?, None)?;
        ladder.w1_values.push(sol.plan.w1());
        ladder.alpha_values.push(sol.plan.alpha_cost());
        ladder.plans.push(sol.plan);
    }
    Ok(ladder)
}

/// Result of the lexicographic two-stage solve.
#[derive(Debug, Clone)]
pub struct TwoStage {
    /// Minimizer of `int alpha` over the optimal face of the distance cost.
    pub plan: TransportPlan,
    /// The distance solve, with its 1-Lipschitz potential.
    pub stage_one: Solution,
    pub w1_opt: f64,
    pub alpha_opt: f64,
    /// Reduced-cost threshold that defined the face.
    pub face_threshold: f64,
}

/// Stage one solves the distance problem. Stage two minimizes `alpha` over
/// the pairs where the stage-one potential is saturated,
/// `|x - y| - (u(x) - u(y)) <= face_tol * max(W1, diam)`; every plan on
/// those pairs has distance cost within that margin of `W1`.
pub fn two_stage_oracle(src: &DiscreteMeasure, tgt: &DiscreteMeasure, face_tol: f64) -> Result<TwoStage> {
    if !(face_tol >= 0.0) || !face_tol.is_finite() {
        return Err(Error::InvalidParameter(format!("face tolerance must be nonnegative, got {face_tol}")));
    }
    let (a, b) = (src.to_atoms(), tgt.to_atoms());
    let stage_one = solve_atoms(&a, &b, &CostSpec::Distance, None)?;
    let w1_opt = stage_one.primal_value;
    let threshold = face_tol * w1_opt.max(diameter(&a, &b));
    let plan = stage_two(&a, &b, &stage_one.potential, threshold)?;
    let w1_plan = plan.w1();
    if w1_plan > w1_opt + threshold + 1e-15 {
        return Err(Error::Infeasible(format!(
            "stage-two plan costs {w1_plan}, above the face bound {}",
            w1_opt + threshold
        )));
    }
    let alpha_opt = plan.alpha_cost();
    Ok(TwoStage { plan, stage_one, w1_opt, alpha_opt, face_threshold: threshold })
}

fn stage_two(a: &AtomMeasure, b: &AtomMeasure, u: &KantorovichPotential, threshold: f64) -> Result<TransportPlan> {
    let cost = CostSpec::BetaRestricted { tol: threshold };
    Ok(solve_atoms(a, b, &cost, Some(u))?.plan)
}

fn diameter(a: &AtomMeasure, b: &AtomMeasure) -> f64 {
    a.points().iter().flat_map(|x| b.points().iter().map(move |y| dist(x, y))).fold(0.0, f64::max)
}

/// Comparison of the ladder limit with the two-stage optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionCertificate {
    pub stabilized: bool,
    pub w1_limit: f64,
    pub alpha_limit: f64,
    pub w1_opt: f64,
    pub alpha_opt: f64,
    /// `(w1_limit - w1_opt, alpha_limit - alpha_opt)`
    pub gaps: [f64; 2],
    /// Ladder limit and stage-two plan coincide entrywise.
    pub same_plan: bool,
    pub tol: f64,
}

impl SelectionCertificate {
    /// Uses the last rung when the ladder did not stabilize; `passed` is
    /// false in that case.
    pub fn new(ladder: &EpsilonLadder, oracle: &TwoStage, tol: f64) -> Self {
        let last = ladder.plans.len() - 1;
        let (w1_limit, alpha_limit) = (ladder.w1_values[last], ladder.alpha_values[last]);
        Self {
            stabilized: ladder.is_stabilized(),
            w1_limit,
            alpha_limit,
            w1_opt: oracle.w1_opt,
            alpha_opt: oracle.alpha_opt,
            gaps: [w1_limit - oracle.w1_opt, alpha_limit - oracle.alpha_opt],
            same_plan: ladder.plans[last].same_as(&oracle.plan, STABILITY_TOL),
            tol,
        }
    }

    pub fn max_abs_gap(&self) -> f64 {
        self.gaps[0].abs().max(self.gaps[1].abs())
    }

    /// Stabilized, and both limit inequalities hold within `tol`.
    pub fn passed(&self) -> bool {
        self.stabilized && self.w1_limit <= self.w1_opt + self.tol && self.alpha_limit <= self.alpha_opt + self.tol
    }
}

/// Ladder, oracle and certificate in one call.
pub fn select(
    src: &DiscreteMeasure,
    tgt: &DiscreteMeasure,
    epsilons: &[f64],
    face_tol: f64,
) -> Result<(EpsilonLadder, TwoStage, SelectionCertificate)> {
    let ladder = run_ladder(src, tgt, epsilons)?;
    let oracle = two_stage_oracle(src, tgt, face_tol)?;
    let cert = SelectionCertificate::new(&ladder, &oracle, CERTIFICATE_TOL);
    Ok((ladder, oracle, cert))
}
