mod common;

use common::*;
use monge_core::gaussian::{CovarianceSpec, TruncatedGaussian};
use monge_core::selection::{two_stage_oracle, DEFAULT_FACE_TOL};
use monge_core::support::*;
use monge_core::transport::solve_exact;
use monge_core::CostSpec;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn distance_optimal_plans_pass_support_checks((a, b) in instance()) {
        let sol = solve_exact(&atoms(&a), &atoms(&b), &CostSpec::Distance).unwrap();
        let s = SupportSet::from_plan(&sol.plan);
        prop_assert_eq!(s.entries(), sol.plan.entries().to_vec());
        for len in [2, 3] {
            let r = check_cyclical_monotonicity(&s, &CostSpec::Distance, len, None).unwrap();
            prop_assert!(r.passed, "{:?}", r);
        }
        let p = check_potential(&s, &sol.potential, POTENTIAL_EQ_TOL).unwrap();
        prop_assert!(p.passed, "{:?}", p);
    }

    #[test]
    fn selected_plans_pass_hsupopt((a, b) in instance()) {
        let oracle = two_stage_oracle(&atoms(&a), &atoms(&b), DEFAULT_FACE_TOL).unwrap();
        let r = check_hsupopt(&SupportSet::from_plan(&oracle.plan), HSUPOPT_TOL);
        prop_assert!(r.passed, "{:?}", r);
    }

    #[test]
    fn split_free_supports_round_trip((a, b) in balanced(6)) {
        let plan = solve_exact(&atoms(&a), &atoms(&b), &CostSpec::c_epsilon(1e-3).unwrap()).unwrap().plan;
        let s = SupportSet::from_plan(&plan);
        let report = graphness(&s, 0.0);
        if report.is_graph() {
            prop_assert_eq!(report.max_target_spread, 0.0);
            let map = AtomMap::from_support(&s, 0.0).unwrap();
            prop_assert_eq!(map.induce(), plan.entries().to_vec());
        } else {
            prop_assert!(report.max_target_spread > 0.0 && report.witness.is_some());
        }
    }

    #[test]
    fn ratios_are_deterministic_and_bounded(seed in 0u64..1000, nx in -1.0f64..1.0) {
        let g = TruncatedGaussian::new(CovarianceSpec::from_sequence(vec![1.0, 1.0], 3.0).unwrap(), 2).unwrap();
        let s = SupportSet::from_pairs(vec![
            (vec![0.0, 0.0], vec![1.0, 0.0], 0.5),
            (vec![0.5, 0.0], vec![3.0, 0.0], 0.5),
        ]);
        let surrogates = [
            RatioSurrogate::Full,
            RatioSurrogate::HalfSpace { normal: vec![nx, 1.0] },
            RatioSurrogate::NearestSource,
        ];
        for sur in &surrogates {
            let run = || lebesgue_ratio_estimate(&s, &g, &[0.0, 0.0], &[1.0, 0.0], 0.5, &[0.5, 0.2], 500, seed, sur).unwrap();
            let first = run();
            prop_assert_eq!(&first, &run());
            prop_assert!(first.iter().all(|p| (0.0..=1.0).contains(&p.ratio)));
        }
    }
}
