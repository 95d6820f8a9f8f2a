//! Property-based checks of the quantified invariants: RSTD offset
//! invariance, noiseless solver round-trips, UE drops staying in the
//! footprint, CDF shape, and the combined uncertainty metric.

use posuq_core::eval::empirical_cdf;
use posuq_core::otdoa::{form_rstd, solve_from_distances, SolverSettings};
use posuq_core::radiosim::geometric_toa;
use posuq_core::scenario::{build_indoor_open_office, drop_ues};
use posuq_core::uncertainty::combined_metric;
use posuq_core::{Point2, SPEED_OF_LIGHT};
use proptest::prelude::*;

proptest! {
    #[test]
    fn rstd_is_offset_invariant(
        toas in proptest::collection::vec(1e-8..5e-7f64, 3..12),
        offset in -1e-6..1e-6f64,
        reference in 0usize..3,
    ) {
        let shifted: Vec<f64> = toas.iter().map(|t| t + offset).collect();
        let a = form_rstd(&toas, reference).unwrap();
        let b = form_rstd(&shifted, reference).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-21);
        }
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn noiseless_solve_round_trips(x in 0.0..120.0f64, y in 0.0..50.0f64) {
        let deployment = build_indoor_open_office();
        let ue = Point2::new(x, y);
        let dists: Vec<f64> = deployment
            .bs_positions
            .iter()
            .map(|b| geometric_toa(&ue, b, deployment.ue_height) * SPEED_OF_LIGHT)
            .collect();
        let p = solve_from_distances(&dists, &deployment, &SolverSettings::default()).unwrap();
        prop_assert!(p.distance(&ue) <= 1e-6, "error {}", p.distance(&ue));
    }
}

proptest! {

    #[test]
    fn dropped_ues_stay_in_footprint(seed in any::<u64>(), n in 1usize..200) {
        let deployment = build_indoor_open_office();
        for p in drop_ues(&deployment, n, seed) {
            prop_assert!(deployment.contains(&p));
        }
    }

    #[test]
    fn cdf_is_a_monotone_step_function(values in proptest::collection::vec(0.0..100.0f64, 1..50)) {
        let cdf = empirical_cdf(&values);
        prop_assert_eq!(cdf.len(), values.len());
        for w in cdf.windows(2) {
            prop_assert!(w[0].0 <= w[1].0 && w[0].1 < w[1].1);
        }
        prop_assert!((cdf.last().unwrap().1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn combined_metric_is_root_of_variance_sum(vx in 0.0..1e6f64, vy in 0.0..1e6f64) {
        let c = combined_metric((vx, vy)).unwrap();
        prop_assert_eq!(c.to_bits(), (vx + vy).sqrt().to_bits());
    }
}
