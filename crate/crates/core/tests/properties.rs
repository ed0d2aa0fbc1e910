//! Property tests for the structural invariants: quotient scale invariance,
//! noise determinism, metric symmetry/positivity, and kernel row sums.

use okpz::coupling::{cpk_product, Cpk};
use okpz::domain::{
    make_noise_slice, quotient, quotient_field, BoundaryParams, GridSpec, InitialMeasure,
    NoisePlan, QuotientPoint, SpatialField,
};
use okpz::kernel::path_rng;
use okpz::metrics::{d_x, d_x_bar, d_y, MetricConfig};
use proptest::prelude::*;

fn grid() -> GridSpec {
    GridSpec::new(16, 1e-3, 1.0, &BoundaryParams::neumann()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quotient_is_scale_invariant(
        values in proptest::collection::vec(0.01f64..10.0, 17),
        scale in 0.001f64..1000.0,
    ) {
        let g = grid();
        let f = SpatialField::new(values, g).unwrap();
        let q1 = quotient(&InitialMeasure::density(f.clone()).unwrap(), &g).unwrap();
        let q2 = quotient(&InitialMeasure::density(f.scaled(scale)).unwrap(), &g).unwrap();
        prop_assert_eq!(q1, q2);
    }

    #[test]
    fn quotient_points_are_normalized(
        masses in proptest::collection::vec(0.0f64..5.0, 16),
        hot in 0usize..16,
    ) {
        let mut masses = masses;
        masses[hot] += 1.0; // guarantee nonzero total mass
        let q = QuotientPoint::from_cell_masses(masses).unwrap();
        prop_assert!(q.check_normalized().is_ok());
    }

    #[test]
    fn noise_slices_are_reproducible(seed in any::<u64>(), step in 0usize..10_000) {
        let g = grid();
        let plan = NoisePlan::white(seed);
        let a = make_noise_slice(&plan, step, &g).unwrap();
        let b = make_noise_slice(&plan, step, &g).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn metrics_are_symmetric_nonnegative_and_dominated(
        fa in proptest::collection::vec(0.05f64..5.0, 17),
        fb in proptest::collection::vec(0.05f64..5.0, 17),
    ) {
        let g = grid();
        let f = SpatialField::new(fa, g).unwrap();
        let h = SpatialField::new(fb, g).unwrap();
        let (qf, qh) = (quotient_field(&f).unwrap(), quotient_field(&h).unwrap());
        let dx = d_x(&qf, &qh).unwrap();
        prop_assert!(dx >= 0.0);
        prop_assert_eq!(dx, d_x(&qh, &qf).unwrap());
        let dxb = d_x_bar(&f, &h).unwrap();
        prop_assert_eq!(dxb, d_x_bar(&h, &f).unwrap());
        prop_assert!((0.0..=2.0 + 1e-12).contains(&dxb));
        let cfg = MetricConfig::new(0.35).unwrap();
        prop_assert_eq!(d_y(&f, &h, &cfg).unwrap(), d_y(&h, &f, &cfg).unwrap());
        // Domination chain through cell total variation.
        let tv: f64 = qf.probs().iter().zip(qh.probs()).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(dx <= tv + 1e-12);
        prop_assert!(tv <= dxb + 1e-12);
    }

    #[test]
    fn cpk_products_preserve_row_sums(seed in any::<u64>()) {
        let g = grid();
        let mut rng = path_rng(seed, 0);
        let a = Cpk::random(g, &mut rng);
        let b = Cpk::random(g, &mut rng);
        let p = cpk_product(&a, &b).unwrap();
        let w = g.node_weights();
        for i in 0..p.n() {
            let sum: f64 = p.row(i).iter().zip(&w).map(|(&v, &wv)| v * wv).sum();
            prop_assert!((sum - 1.0).abs() < 1e-10);
        }
        prop_assert!(p.min_entry() > 0.0);
    }
}
