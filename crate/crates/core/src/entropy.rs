//! Relative entropy of grid-snapped measures against a truncated Gaussian,
//! and the entropy convexity inequalities along displacement interpolations.
//!
//! On a grid with cells `k` of volume `vol_k`, Gaussian cell mass `gamma_k`
//! and measure cell mass `p_k`:
//!
//! - `Ent_gamma = sum p_k log(p_k / gamma_k)`
//! - `Ent_L     = sum p_k log(p_k / vol_k)`
//! - `V         = sum p_k V_k`, with `V_k = 1/2 |x_k|^2_{C^-1} + 1/2 log det C`
//!   evaluated at the point `x_k` of the cell where the Gaussian density
//!   equals its cell average `gamma_k / vol_k`.
//!
//! With that choice of representative point the identity
//! `Ent_gamma = Ent_L + V + (d/2) log(2 pi)` holds exactly on every grid.
//! The cell-center value of `V` is reported alongside.

use alloc::format;
use alloc::vec::Vec;

use libm::log;

use crate::cost::CostSpec;
use crate::gaussian::{product_masses, TruncatedGaussian};
use crate::interpolation::InterpolationPath;
use crate::math::{xlogy_ratio, LN_2PI};
use crate::measure::{DiscreteMeasure, Grid, GridMeasure};
use crate::{Error, Result};

/// Floor on the convexity slack.
pub const MIN_SLACK: f64 = 1e-3;
/// Tolerance of the entropy decomposition identity.
pub const DECOMPOSITION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReading {
    /// Relative entropy against the Gaussian.
    pub ent_gamma: f64,
    /// Entropy against Lebesgue measure.
    pub ent_lebesgue: f64,
    /// `V`, half the Cameron–Martin energy plus `1/2 log det C`.
    pub second_moment_half: f64,
    /// `V` evaluated at cell centers instead.
    pub second_moment_half_midpoint: f64,
    pub dim: usize,
    pub cells: usize,
}

impl EntropyReading {
    /// `Ent_gamma - (Ent_L + V + (d/2) log 2pi)`.
    pub fn decomposition_residual(&self) -> f64 {
        self.ent_gamma - (self.ent_lebesgue + self.second_moment_half + 0.5 * self.dim as f64 * LN_2PI)
    }
}

/// Reference quantities of a Gaussian on a fixed grid.
#[derive(Debug, Clone)]
pub struct GaussianGrid {
    grid: Grid,
    gamma: Vec<f64>,
    /// Per axis, per cell: `log(w / g) - 1/2 log 2pi`.
    axis_potential: Vec<Vec<f64>>,
    /// Per axis, per cell: `1/2 (center^2 / c_i + log c_i)`.
    axis_midpoint: Vec<Vec<f64>>,
}

impl GaussianGrid {
    pub fn new(g: &TruncatedGaussian, grid: &Grid) -> Result<Self> {
        if g.dim() != grid.dim() {
            return Err(Error::IncompatibleGrid(format!(
                "gaussian dimension {} vs grid dimension {}",
                g.dim(),
                grid.dim()
            )));
        }
        let axes = g.axis_masses(grid, None)?;
        if axes.iter().flatten().any(|m| !(*m > 0.0)) {
            return Err(Error::NumericFailure("a grid cell carries no gaussian mass".into()));
        }
        let mut axis_potential = Vec::with_capacity(grid.dim());
        let mut axis_midpoint = Vec::with_capacity(grid.dim());
        for ((edges, masses), c) in grid.axes().iter().zip(&axes).zip(g.variances()) {
            axis_potential
                .push(edges.windows(2).zip(masses).map(|(w, m)| log((w[1] - w[0]) / m) - 0.5 * LN_2PI).collect());
            axis_midpoint.push(
                edges
                    .windows(2)
                    .map(|w| {
                        let x = 0.5 * (w[0] + w[1]);
                        0.5 * (x * x / c + log(*c))
                    })
                    .collect(),
            );
        }
        Ok(Self { grid: grid.clone(), gamma: product_masses(&axes), axis_potential, axis_midpoint })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Gaussian cell masses.
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn reading(&self, m: &GridMeasure) -> Result<EntropyReading> {
        if m.grid() != &self.grid {
            return Err(Error::IncompatibleGrid("measure lives on a different grid".into()));
        }
        let mut ent_gamma = 0.0;
        let mut ent_lebesgue = 0.0;
        let mut v = 0.0;
        let mut v_mid = 0.0;
        for (k, (&p, &gk)) in m.masses().iter().zip(&self.gamma).enumerate() {
            if p == 0.0 {
                continue;
            }
            let idx = self.grid.unflatten(k);
            let (mut pot, mut mid) = (0.0, 0.0);
            for (axis, &i) in idx.iter().enumerate() {
                pot += self.axis_potential[axis][i];
                mid += self.axis_midpoint[axis][i];
            }
            ent_gamma += xlogy_ratio(p, gk);
            ent_lebesgue += xlogy_ratio(p, self.grid.cell_volume(k));
            v += p * pot;
            v_mid += p * mid;
        }
        if !ent_gamma.is_finite() || !ent_lebesgue.is_finite() {
            return Err(Error::EntropyUndefined("non-finite entropy on the grid".into()));
        }
        Ok(EntropyReading {
            ent_gamma,
            ent_lebesgue,
            second_moment_half: v,
            second_moment_half_midpoint: v_mid,
            dim: self.grid.dim(),
            cells: self.grid.cell_count(),
        })
    }

    /// Snaps atoms first; grid measures must already live on this grid.
    pub fn reading_of(&self, m: &DiscreteMeasure) -> Result<EntropyReading> {
        if m.dim() != self.grid.dim() {
            return Err(Error::IncompatibleGrid(format!(
                "measure dimension {} vs grid dimension {}",
                m.dim(),
                self.grid.dim()
            )));
        }
        match m {
            DiscreteMeasure::Grid(gm) => self.reading(gm),
            DiscreteMeasure::Atoms(a) => self.reading(&GridMeasure::snap(a, &self.grid)?),
        }
    }
}

/// Entropy reading of `m` against `g` on `grid`.
pub fn entropy_relative(m: &DiscreteMeasure, g: &TruncatedGaussian, grid: &Grid) -> Result<EntropyReading> {
    GaussianGrid::new(g, grid)?.reading_of(m)
}

/// Which quadratic term the convexity inequality subtracts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvexityMode {
    /// `K(t) = t(1-t) / (2 (1+eps)^2) * (W_eps - eps)^2`, `W_eps` being the
    /// plan's own `c_eps` cost.
    CEpsilon(f64),
    /// `K(t) = t(1-t)/2 * W1^2`, `W1` being the plan's distance cost.
    W1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityRow {
    pub t: f64,
    pub ent_gamma: f64,
    /// `(1-t) Ent(rho_0) + t Ent(rho_1) - K(t)`
    pub bound: f64,
    /// `bound - ent_gamma`
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub mode: ConvexityMode,
    /// `W_eps` or `W1` of the plan.
    pub w_value: f64,
    /// Set when `W_eps - eps < 0` and the quadratic term was dropped.
    pub clamped: bool,
    pub slack: f64,
    pub rows: Vec<ConvexityRow>,
    pub passed: bool,
}

impl ConvexityReport {
    pub fn min_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }
}

/// Checks `Ent(rho_t) <= (1-t) Ent(rho_0) + t Ent(rho_1) - K(t) + slack` at
/// every interior time of `path`.
pub fn check_convexity(path: &InterpolationPath, mode: ConvexityMode, slack: f64) -> Result<ConvexityReport> {
    if !(slack >= 0.0) {
        return Err(Error::InvalidParameter(format!("slack must be nonnegative, got {slack}")));
    }
    if path.readings.len() != path.ts.len() {
        return Err(Error::EntropyUndefined("path carries no entropy readings".into()));
    }
    let e0 = path.readings[0].ent_gamma;
    let e1 = path.readings[path.readings.len() - 1].ent_gamma;
    if !e0.is_finite() || !e1.is_finite() {
        return Err(Error::EntropyUndefined("endpoint entropy is not finite".into()));
    }
    let (w_value, scale, clamped) = match mode {
        ConvexityMode::W1 => {
            let w = path.plan.w1();
            (w, w * w / 2.0, false)
        }
        ConvexityMode::CEpsilon(eps) => {
            let w = path.plan.integral(&CostSpec::c_epsilon(eps)?);
            let base = w - eps;
            let clamped = base < 0.0;
            let base = base.max(0.0);
            (w, base * base / (2.0 * (1.0 + eps) * (1.0 + eps)), clamped)
        }
    };
    let mut rows = Vec::new();
    for (&t, r) in path.ts.iter().zip(&path.readings) {
        if t <= 0.0 || t >= 1.0 {
            continue;
        }
        let bound = (1.0 - t) * e0 + t * e1 - t * (1.0 - t) * scale;
        rows.push(ConvexityRow { t, ent_gamma: r.ent_gamma, bound, margin: bound - r.ent_gamma });
    }
    let passed = rows.iter().all(|r| r.margin >= -slack);
    Ok(ConvexityReport { mode, w_value, clamped, slack, rows, passed })
}

/// `max(delta, MIN_SLACK)`.
pub fn slack_from_refinement(delta: f64) -> f64 {
    delta.abs().max(MIN_SLACK)
}
