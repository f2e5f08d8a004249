mod common;

use monge_core::entropy::{entropy_relative, DECOMPOSITION_TOL};
use monge_core::gaussian::{CovarianceMode, CovarianceSpec, TruncatedGaussian};
use monge_core::{DiscreteMeasure, GridMeasure};
use proptest::prelude::*;

fn gaussian(n: usize) -> TruncatedGaussian {
    TruncatedGaussian::new(CovarianceSpec::build(1.0, 3.0, 8, CovarianceMode::Equality).unwrap(), n).unwrap()
}

fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0, 1.0f64..100.0], len)
        .prop_filter("nonzero", |w| w.iter().any(|x| *x > 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn decomposition_and_jensen(w in weights(6 * 6 * 6)) {
        let g = gaussian(3);
        let grid = g.symmetric_grid(6, 4.0).unwrap();
        let total: f64 = w.iter().sum();
        let m = DiscreteMeasure::Grid(GridMeasure::new(grid.clone(), w.iter().map(|x| x / total).collect()).unwrap());
        let full = entropy_relative(&m, &g, &grid).unwrap();
        prop_assert!(full.decomposition_residual().abs() <= DECOMPOSITION_TOL);
        prop_assert!(full.ent_gamma >= -1e-12);
        let mut previous = full.ent_gamma;
        for k in (1..3).rev() {
            let r = entropy_relative(&m.project(k).unwrap(), &g.truncate(k).unwrap(), &grid.truncate(k).unwrap()).unwrap();
            prop_assert!(r.decomposition_residual().abs() <= DECOMPOSITION_TOL);
            prop_assert!(r.ent_gamma <= previous + 1e-8);
            previous = r.ent_gamma;
        }
    }
}

#[test]
fn refinement_of_a_smooth_measure_settles() {
    // A shifted Gaussian against the standard one: the grid values approach
    // the continuum value |m|^2 / 2 as the grid doubles.
    let g = gaussian(1);
    let mut gaps = Vec::new();
    for cells in [16, 32, 64, 128] {
        let grid = g.symmetric_grid(cells, 6.0).unwrap();
        let m = g.discretize_on(&grid, Some(&[0.5]), usize::MAX).unwrap();
        let r = entropy_relative(&m.into(), &g, &grid).unwrap();
        gaps.push((r.ent_gamma - 0.125).abs());
    }
    assert!(gaps.windows(2).all(|w| w[1] <= w[0]), "{gaps:?}");
}
