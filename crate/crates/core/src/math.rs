//! Small vector and special-function helpers shared by the modules.

use libm::{erfc, log, sqrt};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// Euclidean distance.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sqrt(dist_sq(a, b))
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Standard normal CDF. Uses the upper tail for positive arguments so both
/// tails keep full relative precision.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// `Phi(b) - Phi(a)` for `a <= b`, evaluated on the tail where it is accurate.
pub fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// `x log x` with the `0 log 0 = 0` convention.
#[inline]
pub fn xlogy_ratio(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * log(p / q)
    }
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
#[inline]
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = 1f64.max(a.abs()).max(b.abs());
    (a - b).abs() <= tol * scale
}
