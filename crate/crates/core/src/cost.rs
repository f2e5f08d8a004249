//! Ground costs on `R^n`: the Euclidean distance, the strictly convex
//! `alpha(z) = sqrt(1 + |z|^2)`, their perturbation
//! `c_eps(z) = |z| + eps * alpha(z)`, and `alpha` restricted to the pairs a
//! distance potential saturates.

use alloc::format;
use alloc::vec::Vec;

use libm::sqrt;

use crate::math::{dist, dist_sq};
use crate::{Error, Result};

/// Default tolerance on `u(x) - u(y) = |x - y|` for the restricted cost.
pub const BETA_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostSpec {
    /// `|x - y|`
    Distance,
    /// `sqrt(1 + |x - y|^2)`
    Alpha,
    /// `|x - y| + eps * alpha(x - y)`, `eps > 0`
    CEpsilon(f64),
    /// `alpha(x - y)` where `u(x) - u(y) = |x - y|` within `tol`, `+inf` elsewhere.
    BetaRestricted { tol: f64 },
}

impl CostSpec {
    pub fn c_epsilon(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self::CEpsilon(epsilon))
    }

    pub fn beta_restricted() -> Self {
        Self::BetaRestricted { tol: BETA_TOL }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Distance => "distance",
            Self::Alpha => "alpha",
            Self::CEpsilon(_) => "c_epsilon",
            Self::BetaRestricted { .. } => "beta_restricted",
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self {
            Self::CEpsilon(e) => Some(*e),
            _ => None,
        }
    }

    pub fn needs_potential(&self) -> bool {
        matches!(self, Self::BetaRestricted { .. })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            Self::CEpsilon(e) if !(e > 0.0) || !e.is_finite() => {
                Err(Error::InvalidParameter(format!("epsilon must be positive, got {e}")))
            }
            Self::BetaRestricted { tol } if !(tol >= 0.0) => {
                Err(Error::InvalidParameter(format!("tolerance must be nonnegative, got {tol}")))
            }
            _ => Ok(()),
        }
    }

    /// Cost of moving `x` to `y`. `u` carries `(u(x), u(y))` and is only
    /// read by the restricted cost, which returns `+inf` off the saturated
    /// pairs.
    pub fn eval(&self, x: &[f64], y: &[f64], u: Option<(f64, f64)>) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::BadDimension(format!("points of dimension {} and {}", x.len(), y.len())));
        }
        Ok(match *self {
            Self::Distance => dist(x, y),
            Self::Alpha => sqrt(1.0 + dist_sq(x, y)),
            Self::CEpsilon(eps) => {
                let d2 = dist_sq(x, y);
                sqrt(d2) + eps * sqrt(1.0 + d2)
            }
            Self::BetaRestricted { tol } => {
                let (ux, uy) = u.ok_or(Error::MissingPotential)?;
                let d2 = dist_sq(x, y);
                if ((ux - uy) - sqrt(d2)).abs() <= tol {
                    sqrt(1.0 + d2)
                } else {
                    f64::INFINITY
                }
            }
        })
    }
}

/// `alpha(z) = sqrt(1 + |z|^2)`.
pub fn alpha(z: &[f64]) -> f64 {
    sqrt(1.0 + z.iter().map(|v| v * v).sum::<f64>())
}

/// `grad alpha(z) = z / sqrt(1 + |z|^2)`.
pub fn grad_alpha(z: &[f64]) -> Vec<f64> {
    let a = alpha(z);
    z.iter().map(|v| v / a).collect()
}

/// Upper bound `eps + (1 + eps) |z|` on `c_eps(z)`.
pub fn c_epsilon_bound(epsilon: f64, distance: f64) -> f64 {
    epsilon + (1.0 + epsilon) * distance
}
