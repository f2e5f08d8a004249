//! Centered Gaussians with diagonal covariance `diag(c_1, c_2, ...)` whose
//! variances decay like `c_{i+1} <= c_i / i^alpha` with `alpha > 5/2`, plus
//! sampling and grid discretization of their finite-dimensional truncations.

use alloc::format;
use alloc::vec::Vec;

use libm::{pow, sqrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::math::normal_interval;
use crate::measure::{DiscreteMeasure, Grid, GridMeasure, Point};
use crate::{Error, Result};

/// Default hard truncation of the coordinate sequence.
pub const DEFAULT_DIM_MAX: usize = 8;
/// Default decay exponent.
pub const DEFAULT_ALPHA: f64 = 3.0;
/// Default cap on the number of grid cells.
pub const DEFAULT_MAX_CELLS: usize = 1 << 22;

/// How the variance sequence is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceMode {
    /// `c_{i+1} = c_i / i^alpha`, starting at `c1`.
    Equality,
    /// A user supplied sequence; `c1` is ignored.
    Custom(Vec<f64>),
}

/// Variance sequence `(c_i)` of a diagonal Gaussian covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    c: Vec<f64>,
    alpha_decay: f64,
}

impl CovarianceSpec {
    /// Builds a variance sequence and checks the decay inequality at every
    /// index (no tolerance).
    pub fn build(c1: f64, alpha_decay: f64, dim_max: usize, mode: CovarianceMode) -> Result<Self> {
        if !(alpha_decay > 2.5) || !alpha_decay.is_finite() {
            return Err(Error::BadAlpha(alpha_decay));
        }
        if dim_max == 0 {
            return Err(Error::BadDimension("dim_max must be at least 1".into()));
        }
        let c = match mode {
            CovarianceMode::Equality => {
                if !(c1 > 0.0) || !c1.is_finite() {
                    return Err(Error::InvalidParameter(format!("c1 must be positive, got {c1}")));
                }
                let mut c = Vec::with_capacity(dim_max);
                c.push(c1);
                for i in 1..dim_max {
                    let prev = c[i - 1];
                    c.push(prev / pow(i as f64, alpha_decay));
                }
                c
            }
            CovarianceMode::Custom(c) => {
                if c.len() != dim_max {
                    return Err(Error::BadDimension(format!(
                        "custom sequence has {} entries, dim_max is {dim_max}",
                        c.len()
                    )));
                }
                c
            }
        };
        Self::from_sequence(c, alpha_decay)
    }

    /// Validates an explicit sequence.
    pub fn from_sequence(c: Vec<f64>, alpha_decay: f64) -> Result<Self> {
        if !(alpha_decay > 2.5) || !alpha_decay.is_finite() {
            return Err(Error::BadAlpha(alpha_decay));
        }
        if c.is_empty() {
            return Err(Error::BadDimension("empty variance sequence".into()));
        }
        if let Some(v) = c.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("variances must be positive and finite, got {v}")));
        }
        for i in 1..c.len() {
            // 1-based index i: c_{i+1} <= c_i / i^alpha
            let bound = c[i - 1] / pow(i as f64, alpha_decay);
            if c[i] > bound {
                return Err(Error::DecayViolation { index: i, value: c[i], bound });
            }
        }
        Ok(Self { c, alpha_decay })
    }

    pub fn variances(&self) -> &[f64] {
        &self.c
    }

    pub fn alpha_decay(&self) -> f64 {
        self.alpha_decay
    }

    pub fn dim_max(&self) -> usize {
        self.c.len()
    }
}

impl Default for CovarianceSpec {
    fn default() -> Self {
        Self::build(1.0, DEFAULT_ALPHA, DEFAULT_DIM_MAX, CovarianceMode::Equality).expect("default covariance is valid")
    }
}

/// The centered Gaussian on the first `n` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGaussian {
    spec: CovarianceSpec,
    n: usize,
}

impl TruncatedGaussian {
    pub fn new(spec: CovarianceSpec, n: usize) -> Result<Self> {
        if n == 0 || n > spec.dim_max() {
            return Err(Error::BadDimension(format!("active dimension {n} not in 1..={}", spec.dim_max())));
        }
        Ok(Self { spec, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &CovarianceSpec {
        &self.spec
    }

    /// Active variances `c_1..c_n`.
    pub fn variances(&self) -> &[f64] {
        &self.spec.c[..self.n]
    }

    pub fn std_devs(&self) -> Vec<f64> {
        self.variances().iter().map(|v| sqrt(*v)).collect()
    }

    /// Same covariance, first `k` coordinates.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n {
            return Err(Error::BadDimension(format!("cannot truncate dimension {} to {k}", self.n)));
        }
        Ok(Self { spec: self.spec.clone(), n: k })
    }

    /// `log det C` over the active coordinates.
    pub fn log_det(&self) -> f64 {
        self.variances().iter().map(|v| libm::log(*v)).sum()
    }

    /// `count` independent draws; deterministic in `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Point>> {
        if count == 0 {
            return Err(Error::InvalidParameter("sample count must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = self.std_devs();
        Ok((0..count).map(|_| self.draw(&mut rng, &sd)).collect())
    }

    pub(crate) fn draw<R: Rng>(&self, rng: &mut R, sd: &[f64]) -> Point {
        sd.iter()
            .map(|s| {
                let z: f64 = rng.sample(StandardNormal);
                s * z
            })
            .collect()
    }

    /// Normalized per-axis Gaussian masses of the cells of `grid`, for a
    /// Gaussian with this covariance centered at `mean` (zero if `None`).
    pub fn axis_masses(&self, grid: &Grid, mean: Option<&[f64]>) -> Result<Vec<Vec<f64>>> {
        if grid.dim() != self.n {
            return Err(Error::BadDimension(format!(
                "grid dimension {} differs from gaussian dimension {}",
                grid.dim(),
                self.n
            )));
        }
        if let Some(m) = mean {
            if m.len() != self.n {
                return Err(Error::BadDimension("mean has the wrong length".into()));
            }
        }
        let sd = self.std_devs();
        let mut out = Vec::with_capacity(self.n);
        for (axis, edges) in grid.axes().iter().enumerate() {
            let mu = mean.map_or(0.0, |m| m[axis]);
            let s = sd[axis];
            let mut masses: Vec<f64> =
                edges.windows(2).map(|w| normal_interval((w[0] - mu) / s, (w[1] - mu) / s)).collect();
            let total: f64 = masses.iter().sum();
            if !(total > 0.0) {
                return Err(Error::NumericFailure(format!("axis {axis} carries no gaussian mass")));
            }
            masses.iter_mut().for_each(|m| *m /= total);
            out.push(masses);
        }
        Ok(out)
    }

    /// Cell masses on an arbitrary grid: product of per-axis CDF differences,
    /// renormalized to total mass one.
    pub fn discretize_on(&self, grid: &Grid, mean: Option<&[f64]>, max_cells: usize) -> Result<GridMeasure> {
        let cells = grid.cell_count();
        if cells > max_cells {
            return Err(Error::GridTooLarge { cells, cap: max_cells });
        }
        let axes = self.axis_masses(grid, mean)?;
        GridMeasure::new(grid.clone(), product_masses(&axes))
    }

    /// Discretization on the symmetric box `+- half_width_sigmas * sqrt(c_i)`
    /// with `cells_per_axis` equal cells per axis.
    pub fn grid_discretize(&self, cells_per_axis: usize, half_width_sigmas: f64) -> Result<DiscreteMeasure> {
        let grid = self.symmetric_grid(cells_per_axis, half_width_sigmas)?;
        Ok(DiscreteMeasure::Grid(self.discretize_on(&grid, None, DEFAULT_MAX_CELLS)?))
    }

    /// The symmetric grid used by [`grid_discretize`](Self::grid_discretize).
    pub fn symmetric_grid(&self, cells_per_axis: usize, half_width_sigmas: f64) -> Result<Grid> {
        if cells_per_axis < 2 {
            return Err(Error::InvalidParameter("need at least 2 cells per axis".into()));
        }
        if !(half_width_sigmas > 0.0) || !half_width_sigmas.is_finite() {
            return Err(Error::InvalidParameter("half width must be positive".into()));
        }
        let cells = cells_per_axis.checked_pow(self.n as u32).filter(|c| *c <= DEFAULT_MAX_CELLS).ok_or(
            Error::GridTooLarge { cells: cells_per_axis.saturating_pow(self.n as u32), cap: DEFAULT_MAX_CELLS },
        )?;
        debug_assert!(cells > 0);
        let bounds = self
            .std_devs()
            .iter()
            .map(|s| (-half_width_sigmas * s, half_width_sigmas * s, cells_per_axis))
            .collect::<Vec<_>>();
        Grid::uniform(&bounds)
    }
}

/// Row-major outer product of per-axis masses (axis 0 varies slowest).
pub(crate) fn product_masses(axes: &[Vec<f64>]) -> Vec<f64> {
    let mut out = alloc::vec![1.0];
    for masses in axes {
        let mut next = Vec::with_capacity(out.len() * masses.len());
        for p in &out {
            next.extend(masses.iter().map(|m| p * m));
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::normal_cdf;

    fn std_gaussian(n: usize) -> TruncatedGaussian {
        let spec = CovarianceSpec::from_sequence(alloc::vec![1.0; n], 3.0).unwrap();
        TruncatedGaussian::new(spec, n).unwrap()
    }

    #[test]
    fn equality_mode_alpha_three() {
        let spec = CovarianceSpec::build(1.0, 3.0, 4, CovarianceMode::Equality).unwrap();
        let expected = [1.0, 1.0, 1.0 / 8.0, 1.0 / 216.0];
        for (got, want) in spec.variances().iter().zip(expected) {
            approx::assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        let single = CovarianceSpec::build(1.0, 3.0, 1, CovarianceMode::Equality).unwrap();
        assert_eq!(single.variances(), &[1.0]);
    }

    #[test]
    fn custom_sequence_violation() {
        let err = CovarianceSpec::build(1.0, 3.0, 2, CovarianceMode::Custom(alloc::vec![1.0, 1.1])).unwrap_err();
        assert!(matches!(err, Error::DecayViolation { index: 1, .. }));
        assert!(CovarianceSpec::build(1.0, 3.0, 2, CovarianceMode::Custom(alloc::vec![1.0, 0.5])).is_ok());
    }

    #[test]
    fn alpha_must_exceed_five_halves() {
        assert_eq!(CovarianceSpec::build(1.0, 2.5, 3, CovarianceMode::Equality), Err(Error::BadAlpha(2.5)));
        assert!(CovarianceSpec::build(1.0, 2.5001, 3, CovarianceMode::Equality).is_ok());
        assert!(matches!(CovarianceSpec::build(1.0, 3.0, 0, CovarianceMode::Equality), Err(Error::BadDimension(_))));
    }

    #[test]
    fn default_sequence_decays() {
        let spec = CovarianceSpec::default();
        assert_eq!(spec.dim_max(), DEFAULT_DIM_MAX);
        for i in 1..spec.dim_max() {
            assert!(spec.variances()[i] <= spec.variances()[i - 1] / pow(i as f64, 3.0));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = std_gaussian(2);
        assert_eq!(g.sample(1, 42).unwrap(), g.sample(1, 42).unwrap());
        assert_ne!(g.sample(1, 42).unwrap(), g.sample(1, 43).unwrap());
        assert!(g.sample(0, 1).is_err());
    }

    #[test]
    fn two_cells_split_evenly() {
        let g = std_gaussian(1);
        let DiscreteMeasure::Grid(m) = g.grid_discretize(2, 4.0).unwrap() else { unreachable!() };
        approx::assert_abs_diff_eq!(m.masses()[0], 0.5, epsilon = 1e-15);
        approx::assert_abs_diff_eq!(m.masses()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn four_cells_match_cdf_differences() {
        let g = std_gaussian(1);
        let DiscreteMeasure::Grid(m) = g.grid_discretize(4, 2.0).unwrap() else { unreachable!() };
        let raw = [
            normal_cdf(-1.0) - normal_cdf(-2.0),
            normal_cdf(0.0) - normal_cdf(-1.0),
            normal_cdf(1.0) - normal_cdf(0.0),
            normal_cdf(2.0) - normal_cdf(1.0),
        ];
        let total: f64 = raw.iter().sum();
        for (got, r) in m.masses().iter().zip(raw) {
            approx::assert_relative_eq!(*got, r / total, max_relative = 1e-13);
        }
    }

    #[test]
    fn product_cells_in_two_dimensions() {
        let g = std_gaussian(2);
        let DiscreteMeasure::Grid(m2) = g.grid_discretize(4, 2.0).unwrap() else { unreachable!() };
        let DiscreteMeasure::Grid(m1) = g.truncate(1).unwrap().grid_discretize(4, 2.0).unwrap() else { unreachable!() };
        for i in 0..4 {
            for j in 0..4 {
                approx::assert_relative_eq!(
                    m2.masses()[i * 4 + j],
                    m1.masses()[i] * m1.masses()[j],
                    max_relative = 1e-14
                );
            }
        }
        approx::assert_abs_diff_eq!(m2.masses().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_cap_enforced() {
        let g = std_gaussian(1);
        let grid = g.symmetric_grid(10, 3.0).unwrap();
        assert!(matches!(g.discretize_on(&grid, None, 5), Err(Error::GridTooLarge { cells: 10, cap: 5 })));
        assert!(g.grid_discretize(1, 3.0).is_err());
        assert!(g.grid_discretize(4, 0.0).is_err());
    }
}
