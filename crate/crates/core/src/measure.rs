//! Discrete probability measures: weighted atoms in `R^n`, or cell masses on
//! a rectangular grid.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

pub type Point = Vec<f64>;

/// Absolute tolerance on the total mass of a probability measure.
pub const MASS_TOL: f64 = 1e-12;

/// Relative slack allowed when snapping a point that sits on the outer
/// boundary of a grid.
const BOX_SLACK: f64 = 1e-9;

fn check_total(masses: &[f64]) -> Result<()> {
    if let Some(m) = masses.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
        return Err(Error::InvalidParameter(format!("masses must be finite and nonnegative, got {m}")));
    }
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::MassNotNormalized(total));
    }
    Ok(())
}

/// Weighted atoms in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomMeasure {
    dim: usize,
    points: Vec<Point>,
    masses: Vec<f64>,
}

impl AtomMeasure {
    pub fn new(points: Vec<Point>, masses: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("measure has no atoms".into()));
        }
        if points.len() != masses.len() {
            return Err(Error::InvalidParameter(format!("{} points but {} masses", points.len(), masses.len())));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::BadDimension("atoms must share a positive dimension".into()));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("atom coordinates must be finite".into()));
        }
        check_total(&masses)?;
        Ok(Self { dim, points, masses })
    }

    /// Rescales `masses` to total one before validating.
    pub fn normalized(points: Vec<Point>, mut masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::MassNotNormalized(total));
        }
        masses.iter_mut().for_each(|m| *m /= total);
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::MassNotNormalized(total));
        }
        Self::new(points, masses)
    }

    /// Equal mass `1/N` on each point.
    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        Self::new(points, alloc::vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Merges atoms with bitwise-identical coordinates (first occurrence
    /// order is kept) and drops zero-mass atoms.
    pub fn coalesced(&self) -> Self {
        let (points, masses) = coalesce(self.points.iter().cloned().zip(self.masses.iter().copied()));
        Self { dim: self.dim, points, masses }
    }
}

fn point_key(p: &[f64]) -> Vec<u64> {
    // +0.0 folds -0.0 into 0.0
    p.iter().map(|x| (x + 0.0).to_bits()).collect()
}

pub(crate) fn coalesce(items: impl IntoIterator<Item = (Point, f64)>) -> (Vec<Point>, Vec<f64>) {
    let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut points = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    for (p, m) in items {
        if m == 0.0 {
            continue;
        }
        match index.get(&point_key(&p)) {
            Some(&k) => masses[k] += m,
            None => {
                index.insert(point_key(&p), points.len());
                points.push(p);
                masses.push(m);
            }
        }
    }
    (points, masses)
}

/// Axis-aligned rectangular grid; each axis is an increasing list of edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::BadDimension("grid needs at least one axis".into()));
        }
        for (k, edges) in axes.iter().enumerate() {
            if edges.len() < 2 {
                return Err(Error::InvalidParameter(format!("axis {k} has no cells")));
            }
            if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidParameter(format!("axis {k} edges must increase strictly")));
            }
        }
        Ok(Self { axes })
    }

    /// Equal cells: one `(lo, hi, cells)` triple per axis.
    pub fn uniform(bounds: &[(f64, f64, usize)]) -> Result<Self> {
        let axes = bounds
            .iter()
            .map(|&(lo, hi, cells)| {
                let h = (hi - lo) / cells as f64;
                (0..=cells).map(|k| if k == cells { hi } else { lo + k as f64 * h }).collect()
            })
            .collect();
        Self::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn cells_per_axis(&self) -> Vec<usize> {
        self.axes.iter().map(|e| e.len() - 1).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|e| e.len() - 1).product()
    }

    /// Row-major multi-index of a flat cell index.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = alloc::vec![0; self.dim()];
        for (k, edges) in self.axes.iter().enumerate().rev() {
            let n = edges.len() - 1;
            idx[k] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        self.axes.iter().zip(idx).fold(0, |acc, (edges, i)| acc * (edges.len() - 1) + i)
    }

    pub fn cell_center(&self, flat: usize) -> Point {
        self.unflatten(flat).iter().zip(&self.axes).map(|(&i, e)| 0.5 * (e[i] + e[i + 1])).collect()
    }

    pub fn cell_volume(&self, flat: usize) -> f64 {
        self.unflatten(flat).iter().zip(&self.axes).map(|(&i, e)| e[i + 1] - e[i]).product()
    }

    /// Cell containing `p`. A coordinate on an interior edge goes to the
    /// upper cell; coordinates within a relative `1e-9` of the outer box are
    /// clamped inside.
    pub fn locate(&self, p: &[f64]) -> Result<usize> {
        if p.len() != self.dim() {
            return Err(Error::BadDimension(format!(
                "point of dimension {} on a grid of dimension {}",
                p.len(),
                self.dim()
            )));
        }
        let mut idx = Vec::with_capacity(self.dim());
        for (x, edges) in p.iter().zip(&self.axes) {
            let lo = edges[0];
            let hi = *edges.last().unwrap();
            let slack = BOX_SLACK * (hi - lo);
            if !(*x >= lo - slack && *x <= hi + slack) {
                return Err(Error::OutOfBox);
            }
            let n = edges.len() - 1;
            let i = edges.partition_point(|e| e <= x).saturating_sub(1).min(n - 1);
            idx.push(i);
        }
        Ok(self.flatten(&idx))
    }

    /// First `k` axes.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.dim() {
            return Err(Error::BadDimension(format!("cannot project dimension {} to {k}", self.dim())));
        }
        Ok(Self { axes: self.axes[..k].to_vec() })
    }
}

/// Cell masses on a grid, row-major with axis 0 varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    grid: Grid,
    masses: Vec<f64>,
}

impl GridMeasure {
    pub fn new(grid: Grid, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != grid.cell_count() {
            return Err(Error::InvalidParameter(format!("{} masses for {} cells", masses.len(), grid.cell_count())));
        }
        check_total(&masses)?;
        Ok(Self { grid, masses })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Cell-center atoms of the cells with positive mass.
    pub fn to_atoms(&self) -> AtomMeasure {
        let (points, masses): (Vec<_>, Vec<_>) = self
            .masses
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(k, m)| (self.grid.cell_center(k), *m))
            .unzip();
        AtomMeasure { dim: self.dim(), points, masses }
    }

    /// Marginal on the first `k` axes.
    pub fn marginal(&self, k: usize) -> Result<Self> {
        let grid = self.grid.truncate(k)?;
        let block = self.masses.len() / grid.cell_count();
        let masses = self.masses.chunks(block).map(|c| c.iter().sum()).collect();
        Ok(Self { grid, masses })
    }

    /// Snaps atoms to the cells that contain them.
    pub fn snap(atoms: &AtomMeasure, grid: &Grid) -> Result<Self> {
        if atoms.dim() != grid.dim() {
            return Err(Error::IncompatibleGrid(format!(
                "measure dimension {} vs grid dimension {}",
                atoms.dim(),
                grid.dim()
            )));
        }
        let mut masses = alloc::vec![0.0; grid.cell_count()];
        for (p, m) in atoms.points().iter().zip(atoms.masses()) {
            masses[grid.locate(p)?] += m;
        }
        Ok(Self { grid: grid.clone(), masses })
    }
}

/// A probability measure in atom or grid form.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscreteMeasure {
    Atoms(AtomMeasure),
    Grid(GridMeasure),
}

impl DiscreteMeasure {
    pub fn dim(&self) -> usize {
        match self {
            Self::Atoms(a) => a.dim(),
            Self::Grid(g) => g.dim(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Self::Atoms(a) => a.total_mass(),
            Self::Grid(g) => g.masses().iter().sum(),
        }
    }

    /// Atom form; grid cells become cell-center atoms.
    pub fn to_atoms(&self) -> AtomMeasure {
        match self {
            Self::Atoms(a) => a.clone(),
            Self::Grid(g) => g.to_atoms(),
        }
    }

    /// Pushforward under the projection onto the first `k` coordinates.
    pub fn project(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.dim() {
            return Err(Error::BadDimension(format!("cannot project dimension {} to {k}", self.dim())));
        }
        Ok(match self {
            Self::Atoms(a) => {
                let (points, masses) = coalesce(a.points().iter().zip(a.masses()).map(|(p, m)| (p[..k].to_vec(), *m)));
                Self::Atoms(AtomMeasure { dim: k, points, masses })
            }
            Self::Grid(g) => Self::Grid(g.marginal(k)?),
        })
    }
}

impl From<AtomMeasure> for DiscreteMeasure {
    fn from(a: AtomMeasure) -> Self {
        Self::Atoms(a)
    }
}

impl From<GridMeasure> for DiscreteMeasure {
    fn from(g: GridMeasure) -> Self {
        Self::Grid(g)
    }
}
