//! Structural checks on plan supports.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, pow, sqrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cost::{alpha, grad_alpha, CostSpec};
use crate::gaussian::TruncatedGaussian;
use crate::math::{dist, dot};
use crate::measure::Point;
use crate::transport::{KantorovichPotential, PlanEntry, TransportPlan};
use crate::{Error, Result};

/// Largest support checked exhaustively for cyclical monotonicity.
pub const EXHAUSTIVE_MAX_PAIRS: usize = 500;
/// Cycles drawn when the support is too large for exhaustive checking.
pub const DEFAULT_CYCLE_SAMPLES: usize = 200_000;
/// Relative cycle tolerance, multiplied by the cost scale.
pub const CYCLE_TOL: f64 = 1e-9;
/// Complementary slackness tolerance.
pub const POTENTIAL_EQ_TOL: f64 = 1e-7;
/// Lipschitz tolerance on pooled points.
pub const LIPSCHITZ_TOL: f64 = 1e-9;
/// Point-to-segment distance, relative to segment length.
pub const COLLINEAR_TOL: f64 = 1e-8;
/// Tolerance of the inner-product inequality.
pub const HSUPOPT_TOL: f64 = 1e-9;
/// Acceptance rates below this abort the ratio estimator.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
const ACCEPTANCE_BATCH: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SupportPair {
    pub source: usize,
    pub target: usize,
    pub x: Point,
    pub y: Point,
    pub mass: f64,
}

/// The support of a plan: one pair per entry, plus the full atom lists the
/// plan's potential lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    pub pairs: Vec<SupportPair>,
    pub sources: Vec<Point>,
    pub targets: Vec<Point>,
}

impl SupportSet {
    pub fn from_plan(plan: &TransportPlan) -> Self {
        let (xs, ys) = (plan.source().points(), plan.target().points());
        let pairs = plan
            .entries()
            .iter()
            .map(|e| SupportPair {
                source: e.source,
                target: e.target,
                x: xs[e.source].clone(),
                y: ys[e.target].clone(),
                mass: e.mass,
            })
            .collect();
        Self { pairs, sources: xs.to_vec(), targets: ys.to_vec() }
    }

    /// Builds a support from raw pairs; atoms are indexed by exact equality.
    pub fn from_pairs(raw: Vec<(Point, Point, f64)>) -> Self {
        let mut sources: Vec<Point> = Vec::new();
        let mut targets: Vec<Point> = Vec::new();
        let index = |list: &mut Vec<Point>, p: &Point| match list.iter().position(|q| q == p) {
            Some(k) => k,
            None => {
                list.push(p.clone());
                list.len() - 1
            }
        };
        let pairs = raw
            .into_iter()
            .map(|(x, y, mass)| {
                let source = index(&mut sources, &x);
                let target = index(&mut targets, &y);
                SupportPair { source, target, x, y, mass }
            })
            .collect();
        Self { pairs, sources, targets }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Rebuilds the plan entries from the pairs.
    pub fn entries(&self) -> Vec<PlanEntry> {
        self.pairs.iter().map(|p| PlanEntry { source: p.source, target: p.target, mass: p.mass }).collect()
    }
}

// Restricted costs are read as alpha, their value on admissible pairs.
fn cost_of(spec: &CostSpec, x: &[f64], y: &[f64]) -> f64 {
    match spec {
        CostSpec::BetaRestricted { .. } => alpha(&sub(y, x)),
        _ => spec.eval(x, y, None).unwrap_or(f64::NAN),
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub max_cycle: usize,
    pub exhaustive: bool,
    pub cycles_checked: usize,
    /// `max(sum c(x_i, y_i) - sum c(x_i, y_{i+1}))` over checked cycles.
    pub worst_violation: f64,
    /// Pair indices of the worst cycle, in cycle order.
    pub worst_cycle: Vec<usize>,
    pub scale: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Checks every cycle of length 2..=`max_cycle` of support pairs, or a
/// seeded sample of them for supports over [`EXHAUSTIVE_MAX_PAIRS`].
/// `tol` defaults to `CYCLE_TOL * scale`, the scale being the largest cost
/// between support points (at least 1).
pub fn check_cyclical_monotonicity(
    s: &SupportSet,
    spec: &CostSpec,
    max_cycle: usize,
    tol: Option<f64>,
) -> Result<CycleReport> {
    check_cyclical_monotonicity_with(s, spec, max_cycle, tol, DEFAULT_CYCLE_SAMPLES, 0)
}

pub fn check_cyclical_monotonicity_with(
    s: &SupportSet,
    spec: &CostSpec,
    max_cycle: usize,
    tol: Option<f64>,
    samples: usize,
    seed: u64,
) -> Result<CycleReport> {
    if !(2..=3).contains(&max_cycle) {
        return Err(Error::InvalidParameter(format!("cycle length must be 2 or 3, got {max_cycle}")));
    }
    let n = s.len();
    let exhaustive = n <= EXHAUSTIVE_MAX_PAIRS;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_cycle = Vec::new();
    let mut checked = 0usize;
    let mut scale: f64 = 1.0;
    let mut consider = |cycle: &[usize], value: f64| {
        checked += 1;
        if value > worst {
            worst = value;
            worst_cycle = cycle.to_vec();
        }
    };

    if exhaustive {
        let mut c = vec![0.0; n * n];
        for (a, p) in s.pairs.iter().enumerate() {
            for (b, q) in s.pairs.iter().enumerate() {
                c[a * n + b] = cost_of(spec, &p.x, &q.y);
                scale = scale.max(c[a * n + b]);
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                consider(&[i, j], c[i * n + i] + c[j * n + j] - c[i * n + j] - c[j * n + i]);
                if max_cycle < 3 {
                    continue;
                }
                for k in j + 1..n {
                    let diag = c[i * n + i] + c[j * n + j] + c[k * n + k];
                    consider(&[i, j, k], diag - c[i * n + j] - c[j * n + k] - c[k * n + i]);
                    consider(&[i, k, j], diag - c[i * n + k] - c[k * n + j] - c[j * n + i]);
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let len = if max_cycle == 3 && rng.random::<bool>() { 3 } else { 2 };
            let mut cycle = [0usize; 3];
            let mut k = 0;
            while k < len {
                let pick = rng.random_range(0..n);
                if !cycle[..k].contains(&pick) {
                    cycle[k] = pick;
                    k += 1;
                }
            }
            let cycle = &cycle[..len];
            let mut value = 0.0;
            for (a, &p) in cycle.iter().enumerate() {
                let q = cycle[(a + 1) % len];
                let own = cost_of(spec, &s.pairs[p].x, &s.pairs[p].y);
                let shifted = cost_of(spec, &s.pairs[p].x, &s.pairs[q].y);
                scale = scale.max(own).max(shifted);
                value += own - shifted;
            }
            consider(cycle, value);
        }
    }
    let tol = tol.unwrap_or(CYCLE_TOL * scale);
    let worst_violation = if checked == 0 { 0.0 } else { worst };
    Ok(CycleReport {
        max_cycle,
        exhaustive,
        cycles_checked: checked,
        worst_violation,
        worst_cycle,
        scale,
        tol,
        passed: worst_violation <= tol && !worst_violation.is_nan(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialReport {
    /// Largest `|u(x) - u(y) - |x - y||` over support pairs.
    pub worst_equality_gap: f64,
    pub worst_pair: Option<usize>,
    /// Largest `|u(p) - u(q)| - |p - q|` over pooled atoms.
    pub worst_lipschitz_excess: f64,
    /// Pooled indices, sources first then targets.
    pub lipschitz_witness: Option<(usize, usize)>,
    pub tol: f64,
    pub lipschitz_tol: f64,
    pub passed: bool,
}

/// Complementary slackness of `u` on the support and its 1-Lipschitz bound
/// on all source and target atoms.
pub fn check_potential(s: &SupportSet, u: &KantorovichPotential, tol: f64) -> Result<PotentialReport> {
    if u.u_source.len() != s.sources.len() || u.u_target.len() != s.targets.len() {
        return Err(Error::MissingValue("potential does not cover every atom".into()));
    }
    if let Some(k) = u.u_source.iter().chain(&u.u_target).position(|v| !v.is_finite()) {
        return Err(Error::MissingValue(format!("potential value {k} is not finite")));
    }
    let mut worst_equality_gap: f64 = 0.0;
    let mut worst_pair = None;
    for (k, p) in s.pairs.iter().enumerate() {
        let (ux, uy) = u.pair(p.source, p.target);
        let gap = (ux - uy - dist(&p.x, &p.y)).abs();
        if gap > worst_equality_gap {
            worst_equality_gap = gap;
            worst_pair = Some(k);
        }
    }
    let points: Vec<&Point> = s.sources.iter().chain(&s.targets).collect();
    let values: Vec<f64> = u.u_source.iter().chain(&u.u_target).copied().collect();
    let mut worst_lipschitz_excess = f64::NEG_INFINITY;
    let mut lipschitz_witness = None;
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            let excess = (values[a] - values[b]).abs() - dist(points[a], points[b]);
            if excess > worst_lipschitz_excess {
                worst_lipschitz_excess = excess;
                lipschitz_witness = Some((a, b));
            }
        }
    }
    if lipschitz_witness.is_none() {
        worst_lipschitz_excess = 0.0;
    }
    let passed = worst_equality_gap <= tol && worst_lipschitz_excess <= LIPSCHITZ_TOL;
    Ok(PotentialReport {
        worst_equality_gap,
        worst_pair,
        worst_lipschitz_excess,
        lipschitz_witness,
        tol,
        lipschitz_tol: LIPSCHITZ_TOL,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HSupOptReport {
    /// Ordered pairs `((x, y), (x', y'))` with `x` on `[x', y']`.
    pub premises: usize,
    /// Premises with `x = x'`, where the inequality holds with equality.
    pub trivial_premises: usize,
    /// No premise was found at all.
    pub vacuous: bool,
    /// Smallest left side over all premises.
    pub min_value: f64,
    /// `(pair of x, pair of x')` at the smallest left side.
    pub witness: Option<(usize, usize)>,
    pub violations: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (dot(&sub(p, a), &ab) / len2).clamp(0.0, 1.0);
    let q: Vec<f64> = a.iter().zip(&ab).map(|(a, d)| a + t * d).collect();
    dist(p, &q)
}

/// `<grad alpha(y - x') - grad alpha(y' - x), x - x'>`.
pub fn hsupopt_value(x: &[f64], y: &[f64], xp: &[f64], yp: &[f64]) -> f64 {
    let g1 = grad_alpha(&sub(y, xp));
    let g2 = grad_alpha(&sub(yp, x));
    dot(&sub(&g1, &g2), &sub(x, xp))
}

/// Scans every ordered pair of support pairs with `x` on `[x', y']` and
/// checks `<grad alpha(y - x') - grad alpha(y' - x), x - x'> >= -tol`.
pub fn check_hsupopt(s: &SupportSet, tol: f64) -> HSupOptReport {
    let mut premises = 0;
    let mut trivial_premises = 0;
    let mut min_value = f64::INFINITY;
    let mut witness = None;
    let mut violations = 0;
    for (a, p) in s.pairs.iter().enumerate() {
        for (b, q) in s.pairs.iter().enumerate() {
            if a == b {
                continue;
            }
            let len = dist(&q.x, &q.y);
            if segment_distance(&p.x, &q.x, &q.y) > COLLINEAR_TOL * len {
                continue;
            }
            premises += 1;
            if p.x == q.x {
                trivial_premises += 1;
            }
            let value = hsupopt_value(&p.x, &p.y, &q.x, &q.y);
            if value < -tol {
                violations += 1;
            }
            if value < min_value {
                min_value = value;
                witness = Some((a, b));
            }
        }
    }
    HSupOptReport {
        premises,
        trivial_premises,
        vacuous: premises == 0,
        min_value: if premises == 0 { 0.0 } else { min_value },
        witness,
        violations,
        tol,
        passed: violations == 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphnessReport {
    /// Source points with at least two distinct targets.
    pub split_sources: usize,
    /// Largest diameter of the target set of one source point.
    pub max_target_spread: f64,
    /// Two pairs `(x, y0)`, `(x, y1)` with `y0 != y1`, by pair index.
    pub witness: Option<(usize, usize)>,
    /// `<(y1 - x) - (y0 - x), grad alpha(y1 - x) - grad alpha(y0 - x)>`.
    pub splitting_inner: Option<f64>,
    /// `<grad alpha(y0 - x) - grad alpha(y1 - x), y1 - x>`.
    pub gradient_gap: Option<f64>,
}

impl GraphnessReport {
    pub fn is_graph(&self) -> bool {
        self.split_sources == 0
    }
}

// Pair indices grouped by source point, each group keyed by its first point.
fn source_groups(s: &SupportSet, merge_tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, p) in s.pairs.iter().enumerate() {
        match groups.iter_mut().find(|g| dist(&s.pairs[g[0]].x, &p.x) <= merge_tol) {
            Some(g) => g.push(k),
            None => groups.push(vec![k]),
        }
    }
    groups
}

pub fn graphness(s: &SupportSet, merge_tol: f64) -> GraphnessReport {
    let mut split_sources = 0;
    let mut max_target_spread: f64 = 0.0;
    let mut witness = None;
    for g in source_groups(s, merge_tol) {
        let mut spread: f64 = 0.0;
        let mut far = None;
        for (a, &i) in g.iter().enumerate() {
            for &j in &g[a + 1..] {
                let d = dist(&s.pairs[i].y, &s.pairs[j].y);
                if d > merge_tol && d > spread {
                    spread = d;
                    far = Some((i, j));
                }
            }
        }
        if far.is_some() {
            split_sources += 1;
            if witness.is_none() {
                witness = far;
            }
        }
        max_target_spread = max_target_spread.max(spread);
    }
    let (splitting_inner, gradient_gap) = match witness {
        Some((i, j)) => {
            let x = &s.pairs[i].x;
            let d0 = sub(&s.pairs[i].y, x);
            let d1 = sub(&s.pairs[j].y, x);
            let (g0, g1) = (grad_alpha(&d0), grad_alpha(&d1));
            (Some(dot(&sub(&d1, &d0), &sub(&g1, &g0))), Some(dot(&sub(&g0, &g1), &d1)))
        }
        None => (None, None),
    };
    GraphnessReport { split_sources, max_target_spread, witness, splitting_inner, gradient_gap }
}

/// The map `source atom -> (target atom, mass)` of a split-free support.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomMap {
    pub assignments: Vec<(usize, usize, f64)>,
}

impl AtomMap {
    /// `None` when some source point has two distinct targets.
    pub fn from_support(s: &SupportSet, merge_tol: f64) -> Option<Self> {
        if !graphness(s, merge_tol).is_graph() {
            return None;
        }
        Some(Self { assignments: s.pairs.iter().map(|p| (p.source, p.target, p.mass)).collect() })
    }

    /// Plan entries of the induced coupling `(id, T)_# rho_0`.
    pub fn induce(&self) -> Vec<PlanEntry> {
        let mut out: Vec<PlanEntry> =
            self.assignments.iter().map(|&(source, target, mass)| PlanEntry { source, target, mass }).collect();
        out.sort_by_key(|e| (e.source, e.target));
        out
    }
}

/// Distinct source points of pairs whose target lies in the closed ball
/// around `y`.
pub fn gamma_inverse_query(s: &SupportSet, y: &[f64], r: f64) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for p in &s.pairs {
        if dist(&p.y, y) <= r && !out.contains(&p.x) {
            out.push(p.x.clone());
        }
    }
    out
}

/// Finite stand-in for the set in the numerator of the ratio.
#[derive(Debug, Clone, PartialEq)]
pub enum RatioSurrogate {
    /// Every point belongs.
    Full,
    /// Points `z` with `<z - x, normal> >= 0`.
    HalfSpace { normal: Point },
    /// `z` belongs iff its nearest support source has a pair whose target
    /// lies within `r` of `y`.
    NearestSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioPoint {
    pub delta: f64,
    pub ratio: f64,
    pub stderr: f64,
    pub accepted: usize,
    pub proposals: usize,
}

/// Monte Carlo estimate of `gamma(S ∩ B(x, delta)) / gamma(B(x, delta))`
/// for each `delta`, with `S` given by `surrogate`.
///
/// Samples from `g` restricted to the open ball by proposing uniformly in
/// the ball and accepting against the Gaussian density; `mc_samples`
/// accepted draws per radius. Each radius gets its own stream of the seed.
#[allow(clippy::too_many_arguments)]
pub fn lebesgue_ratio_estimate(
    s: &SupportSet,
    g: &TruncatedGaussian,
    x: &[f64],
    y: &[f64],
    r: f64,
    deltas: &[f64],
    mc_samples: usize,
    seed: u64,
    surrogate: &RatioSurrogate,
) -> Result<Vec<RatioPoint>> {
    let d = g.dim();
    if x.len() != d || y.len() != d {
        return Err(Error::BadDimension(format!("points must have dimension {d}")));
    }
    if mc_samples == 0 {
        return Err(Error::InvalidParameter("mc_samples must be positive".into()));
    }
    if deltas.iter().any(|&t| !(t > 0.0) || !t.is_finite()) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("deltas must be positive and strictly decreasing".into()));
    }
    if let RatioSurrogate::HalfSpace { normal } = surrogate {
        if normal.len() != d {
            return Err(Error::BadDimension("half-space normal has the wrong dimension".into()));
        }
    }
    // Source points, each flagged by whether it reaches the ball around y.
    let mut flagged: Vec<(Point, bool)> = Vec::new();
    if matches!(surrogate, RatioSurrogate::NearestSource) {
        if s.is_empty() {
            return Err(Error::InvalidParameter("nearest-source surrogate needs a nonempty support".into()));
        }
        for p in &s.pairs {
            let hit = dist(&p.y, y) <= r;
            match flagged.iter_mut().find(|(q, _)| *q == p.x) {
                Some(entry) => entry.1 |= hit,
                None => flagged.push((p.x.clone(), hit)),
            }
        }
    }
    let belongs = |z: &[f64]| match surrogate {
        RatioSurrogate::Full => true,
        RatioSurrogate::HalfSpace { normal } => dot(&sub(z, x), normal) >= 0.0,
        RatioSurrogate::NearestSource => {
            let mut best = (f64::INFINITY, false);
            for (q, hit) in &flagged {
                let dq = dist(z, q);
                if dq < best.0 {
                    best = (dq, *hit);
                }
            }
            best.1
        }
    };

    let inv_var: Vec<f64> = g.variances().iter().map(|c| 1.0 / c).collect();
    let quad = |z: &[f64]| z.iter().zip(&inv_var).map(|(v, w)| v * v * w).sum::<f64>();
    let mut out = Vec::with_capacity(deltas.len());
    for (k, &delta) in deltas.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        // Lower bound of the quadratic form over the ball, via its bounding box.
        let q_min: f64 = x
            .iter()
            .zip(&inv_var)
            .map(|(c, w)| {
                let gap = (c.abs() - delta).max(0.0);
                gap * gap * w
            })
            .sum();
        let (mut accepted, mut proposals, mut hits) = (0usize, 0usize, 0usize);
        let mut z = vec![0.0; d];
        while accepted < mc_samples {
            proposals += 1;
            uniform_in_ball(&mut rng, x, delta, &mut z);
            if rng.random::<f64>() < exp(-0.5 * (quad(&z) - q_min)) {
                accepted += 1;
                if belongs(&z) {
                    hits += 1;
                }
            }
            if proposals % ACCEPTANCE_BATCH == 0 && (accepted as f64) < MIN_ACCEPTANCE * proposals as f64 {
                return Err(Error::InsufficientSamples { accepted, proposals });
            }
        }
        if (accepted as f64) < MIN_ACCEPTANCE * proposals as f64 {
            return Err(Error::InsufficientSamples { accepted, proposals });
        }
        let ratio = hits as f64 / accepted as f64;
        let stderr = sqrt(ratio * (1.0 - ratio) / accepted as f64);
        out.push(RatioPoint { delta, ratio, stderr, accepted, proposals });
    }
    Ok(out)
}

// Uniform point of the open ball of radius `delta` around `center`.
fn uniform_in_ball<R: Rng>(rng: &mut R, center: &[f64], delta: f64, out: &mut [f64]) {
    let d = center.len();
    loop {
        let mut n2 = 0.0;
        for v in out.iter_mut() {
            let s: f64 = rng.sample(StandardNormal);
            *v = s;
            n2 += s * s;
        }
        let u: f64 = rng.random();
        let radius = delta * pow(u, 1.0 / d as f64);
        if n2 == 0.0 || radius >= delta {
            continue;
        }
        let scale = radius / sqrt(n2);
        for (v, c) in out.iter_mut().zip(center) {
            *v = c + *v * scale;
        }
        return;
    }
}
