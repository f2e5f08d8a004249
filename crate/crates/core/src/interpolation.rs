//! Displacement interpolation `rho_t = ((1 - t) P1 + t P2)_# Pi` and the
//! constant-speed geodesic check for the distance cost.

use alloc::format;
use alloc::vec::Vec;

use crate::cost::CostSpec;
use crate::entropy::{EntropyReading, GaussianGrid};
use crate::gaussian::TruncatedGaussian;
use crate::math::rel_close;
use crate::measure::{coalesce, AtomMeasure, Grid, GridMeasure};
use crate::transport::{solve_atoms, TransportPlan};
use crate::{Error, Result};

/// Default interior times.
pub const DEFAULT_TS: [f64; 3] = [0.25, 0.5, 0.75];
/// Relative tolerance of the geodesic identity.
pub const GEODESIC_TOL: f64 = 1e-6;

/// One atom `(1 - t) x_i + t y_j` per plan entry, duplicates merged.
pub fn interpolate(plan: &TransportPlan, t: f64) -> Result<AtomMeasure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t must lie in [0, 1], got {t}")));
    }
    let (xs, ys) = (plan.source().points(), plan.target().points());
    let (points, masses) = coalesce(plan.entries().iter().map(|e| {
        let p = xs[e.source].iter().zip(&ys[e.target]).map(|(x, y)| (1.0 - t) * x + t * y).collect();
        (p, e.mass)
    }));
    AtomMeasure::new(points, masses)
}

/// Interpolated measures along a plan, optionally snapped to a grid with
/// entropy readings.
#[derive(Debug, Clone)]
pub struct InterpolationPath {
    pub plan: TransportPlan,
    /// Sorted, always containing 0 and 1.
    pub ts: Vec<f64>,
    pub atoms: Vec<AtomMeasure>,
    pub grid: Option<Grid>,
    pub snapped: Vec<GridMeasure>,
    pub readings: Vec<EntropyReading>,
}

impl InterpolationPath {
    /// `ts` are the interior times; 0 and 1 are added.
    pub fn new(plan: &TransportPlan, ts: &[f64]) -> Result<Self> {
        let mut all: Vec<f64> = Vec::with_capacity(ts.len() + 2);
        all.push(0.0);
        for &t in ts {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidParameter(format!("t must lie in [0, 1], got {t}")));
            }
            all.push(t);
        }
        all.push(1.0);
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.dedup();
        let atoms = all.iter().map(|&t| interpolate(plan, t)).collect::<Result<Vec<_>>>()?;
        Ok(Self { plan: plan.clone(), ts: all, atoms, grid: None, snapped: Vec::new(), readings: Vec::new() })
    }

    /// Snaps every measure to `grid` and reads its entropy against `g`.
    pub fn with_entropy(mut self, g: &TruncatedGaussian, grid: &Grid) -> Result<Self> {
        let reference = GaussianGrid::new(g, grid)?;
        let mut snapped = Vec::with_capacity(self.atoms.len());
        let mut readings = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let s = GridMeasure::snap(a, grid)?;
            readings.push(reference.reading(&s)?);
            snapped.push(s);
        }
        self.grid = Some(grid.clone());
        self.snapped = snapped;
        self.readings = readings;
        Ok(self)
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.ts.iter().position(|s| *s == t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicRow {
    pub t: f64,
    pub s: f64,
    pub w1: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicReport {
    pub w1_endpoints: f64,
    pub rows: Vec<GeodesicRow>,
    pub tol: f64,
    pub passed: bool,
}

/// Checks `W1(rho_t, rho_s) = |t - s| W1(rho_0, rho_1)` by exact solves.
/// With no `pairs` given, every pair of the path's times is checked.
pub fn geodesic_check(path: &InterpolationPath, pairs: &[(f64, f64)], tol: f64) -> Result<GeodesicReport> {
    if path.ts.len() < 3 {
        return Err(Error::InvalidParameter("geodesic check needs at least three times".into()));
    }
    let all: Vec<(f64, f64)>;
    let pairs = if pairs.is_empty() {
        all = path.ts.iter().enumerate().flat_map(|(k, &t)| path.ts[k + 1..].iter().map(move |&s| (t, s))).collect();
        &all
    } else {
        pairs
    };
    let w1 = path.plan.w1();
    let mut rows = Vec::with_capacity(pairs.len());
    let mut passed = true;
    for &(t, s) in pairs {
        let a = measure_at(path, t)?;
        let b = measure_at(path, s)?;
        let value = if t == s { 0.0 } else { solve_atoms(&a, &b, &CostSpec::Distance, None)?.primal_value };
        let expected = (t - s).abs() * w1;
        passed &= rel_close(value, expected, tol);
        rows.push(GeodesicRow { t, s, w1: value, expected });
    }
    Ok(GeodesicReport { w1_endpoints: w1, rows, tol, passed })
}

fn measure_at(path: &InterpolationPath, t: f64) -> Result<AtomMeasure> {
    match path.index_of(t) {
        Some(k) => Ok(path.atoms[k].clone()),
        None => interpolate(&path.plan, t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::solve_exact;
    use alloc::vec;

    fn shift_plan() -> TransportPlan {
        let src = AtomMeasure::uniform((0..4).map(|x| vec![x as f64]).collect()).unwrap();
        let tgt = AtomMeasure::uniform((1..5).map(|x| vec![x as f64]).collect()).unwrap();
        crate::selection::two_stage_oracle(&src.into(), &tgt.into(), 1e-9).unwrap().plan
    }

    #[test]
    fn endpoints_reproduce_marginals() {
        let plan = shift_plan();
        assert_eq!(&interpolate(&plan, 0.0).unwrap(), plan.source());
        assert_eq!(&interpolate(&plan, 1.0).unwrap(), plan.target());
        assert!(interpolate(&plan, 1.5).is_err());
    }

    #[test]
    fn midpoint_of_the_shift() {
        let mid = interpolate(&shift_plan(), 0.5).unwrap();
        let expected: Vec<Vec<f64>> = [0.5, 1.5, 2.5, 3.5].iter().map(|x| vec![*x]).collect();
        assert_eq!(mid.points(), expected.as_slice());
        assert!(mid.masses().iter().all(|m| *m == 0.25));
    }

    #[test]
    fn coinciding_atoms_merge() {
        // 0 -> 2 and 2 -> 0 cross at t = 1/2.
        let m = AtomMeasure::uniform(vec![vec![0.0], vec![2.0]]).unwrap();
        let plan = TransportPlan::new(
            m.clone(),
            m,
            vec![
                crate::transport::PlanEntry { source: 0, target: 1, mass: 0.5 },
                crate::transport::PlanEntry { source: 1, target: 0, mass: 0.5 },
            ],
            CostSpec::Distance,
        )
        .unwrap();
        let mid = interpolate(&plan, 0.5).unwrap();
        assert_eq!(mid.points(), &[vec![1.0]]);
        assert_eq!(mid.masses(), &[1.0]);
    }

    #[test]
    fn shift_is_a_geodesic() {
        let path = InterpolationPath::new(&shift_plan(), &DEFAULT_TS).unwrap();
        let report =
            geodesic_check(&path, &[(0.0, 1.0), (0.0, 0.5), (0.5, 1.0), (0.25, 0.75), (0.5, 0.5)], GEODESIC_TOL)
                .unwrap();
        assert!(report.passed, "{report:?}");
        let by_pair: Vec<f64> = report.rows.iter().map(|r| r.w1).collect();
        approx::assert_abs_diff_eq!(by_pair[0], 1.0, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(by_pair[1], 0.5, epsilon = 1e-12);
        assert_eq!(by_pair[4], 0.0);
        let full = geodesic_check(&path, &[], GEODESIC_TOL).unwrap();
        assert_eq!(full.rows.len(), 10);
        assert!(full.passed);
    }

    #[test]
    fn mass_is_conserved() {
        let src = AtomMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let tgt = AtomMeasure::new(vec![vec![3.0, 1.0], vec![-1.0, 0.5]], vec![0.4, 0.6]).unwrap();
        let plan = solve_exact(&src.into(), &tgt.into(), &CostSpec::Distance).unwrap().plan;
        for t in [0.0, 0.3, 0.5, 0.9, 1.0] {
            let m = interpolate(&plan, t).unwrap();
            approx::assert_abs_diff_eq!(m.total_mass(), plan.total_mass(), epsilon = 1e-15);
        }
    }
}
