#![allow(dead_code)]

use monge_core::{AtomMeasure, DiscreteMeasure, Point};
use proptest::prelude::*;

/// Atom measure with `count` points in `[-3, 3]^dim` and positive masses.
pub fn measure(dim: usize, count: usize) -> impl Strategy<Value = AtomMeasure> {
    (prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), count), prop::collection::vec(0.05f64..1.0, count))
        .prop_map(|(points, masses)| AtomMeasure::normalized(points, masses).unwrap())
}

/// A pair of measures of common dimension 1..=3 with 1..=5 atoms each.
pub fn instance() -> impl Strategy<Value = (AtomMeasure, AtomMeasure)> {
    (1usize..=3, 1usize..=5, 1usize..=5).prop_flat_map(|(d, m, n)| (measure(d, m), measure(d, n)))
}

/// Uniform measures on equally many atoms.
pub fn balanced(max: usize) -> impl Strategy<Value = (AtomMeasure, AtomMeasure)> {
    (1usize..=3, 1usize..=max).prop_flat_map(|(d, n)| {
        let pts = move || prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), n);
        (pts(), pts()).prop_map(|(a, b)| (AtomMeasure::uniform(a).unwrap(), AtomMeasure::uniform(b).unwrap()))
    })
}

pub fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn alpha_of(x: &[f64], y: &[f64]) -> f64 {
    let d = euclid(x, y);
    (1.0 + d * d).sqrt()
}

pub fn matrix(a: &AtomMeasure, b: &AtomMeasure, f: impl Fn(&[f64], &[f64]) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    for x in a.points() {
        for y in b.points() {
            out.push(f(x, y));
        }
    }
    out
}

pub fn atoms(m: &AtomMeasure) -> DiscreteMeasure {
    m.clone().into()
}

pub fn line(xs: &[f64]) -> AtomMeasure {
    AtomMeasure::uniform(xs.iter().map(|x| vec![*x] as Point).collect()).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
