//! Property-based invariants over randomized spaces and fields.

mod common;

use common::{max_abs, rel_residual, rng};
use lndev_core::curvature::{curvature, thomas_from_gamma, torsion};
use lndev_core::deviation::integrate_geodesic;
use lndev_core::field::ArrayField;
use lndev_core::lie::lie_bracket;
use lndev_core::manifold::{transform_connection, ConnectionSpace};
use lndev_core::numerics::{IntegratorSettings, OdeMethod};
use lndev_core::point::ChartPoint;
use ndarray::{arr1, Array3};
use proptest::prelude::*;

fn cfg() -> ProptestConfig {
    ProptestConfig {
        cases: 16,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn torsion_and_curvature_antisymmetries_hold_exactly(seed in 0u64..5000) {
        let mut r = rng(seed);
        let space = common::random_space(&mut r, 2);
        let x = common::random_point(&mut r, 2);
        let t = torsion(&space, &x).unwrap();
        let c = curvature(&space, &x).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    prop_assert_eq!(t.t[(i, j, k)], -t.t[(i, k, j)]);
                    for l in 0..2 {
                        prop_assert_eq!(c.r[(i, j, k, l)], -c.r[(i, j, l, k)]);
                    }
                }
            }
        }
    }

    #[test]
    fn lie_bracket_antisymmetry(seed in 0u64..5000) {
        let mut r = rng(seed);
        let space = common::random_coordinate_space(&mut r, 2);
        let a = common::random_vector_field(&mut r, 2, 0.5);
        let b = common::random_vector_field(&mut r, 2, 0.5);
        let x = common::random_point(&mut r, 2);
        let ab = lie_bracket(&space, &a, &b, &x).unwrap();
        let ba = lie_bracket(&space, &b, &a, &x).unwrap();
        for k in 0..2 {
            prop_assert!((ab[k] + ba[k]).abs() < 1e-12);
        }
        let aa = lie_bracket(&space, &a, &a, &x).unwrap();
        prop_assert!(max_abs(aa.iter()) < 1e-12);
    }

    #[test]
    fn thomas_parameters_are_projectively_invariant(seed in 0u64..5000) {
        let mut r = rng(seed);
        use rand::Rng;
        let n = 3usize;
        let mut g = Array3::<f64>::zeros((n, n, n));
        for v in g.iter_mut() {
            *v = r.random_range(-1.0..1.0);
        }
        let psi: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut g2 = g.clone();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i == j {
                        g2[(i, j, k)] += psi[k];
                    }
                    if i == k {
                        g2[(i, j, k)] += psi[j];
                    }
                }
            }
        }
        let p1 = thomas_from_gamma(&g);
        let p2 = thomas_from_gamma(&g2);
        for (a, b) in p1.iter().zip(p2.iter()) {
            prop_assert!((a - b).abs() < 1e-9, "Π changed: {} vs {}", a, b);
        }
        // trace-free in the first pair
        for j in 0..n {
            let mut tr = 0.0;
            for l in 0..n {
                tr += p1[(l, l, j)];
            }
            prop_assert!(tr.abs() < 1e-12);
        }
    }

    #[test]
    fn frame_round_trip_recovers_connection(seed in 0u64..5000) {
        let mut r = rng(seed);
        use rand::Rng;
        let space = common::random_coordinate_space(&mut r, 2);
        let x = common::random_point(&mut r, 2);
        // constant invertible change
        let m = loop {
            let cand = ndarray::arr2(&[
                [1.0 + r.random_range(-0.3..0.3), r.random_range(-0.3..0.3)],
                [r.random_range(-0.3..0.3), 1.0 + r.random_range(-0.3..0.3)],
            ]);
            if lndev_core::numerics::linalg::det(&cand).abs() > 0.3 {
                break cand;
            }
        };
        let fwd = ArrayField::constant(m.clone().into_dyn());
        let back = ArrayField::constant(
            lndev_core::numerics::linalg::inverse(&m, 1e-12)
                .unwrap()
                .into_dyn(),
        );
        // feed the transformed components back through the inverse change
        let mid_space = {
            let space2 = space.clone();
            let fwd2 = fwd.clone();
            ConnectionSpace::new(
                lndev_core::manifold::FrameField::new(2, fwd).unwrap(),
                lndev_core::manifold::ConnectionField::new(
                    2,
                    ArrayField::new(vec![2, 2, 2], move |p| {
                        Ok(transform_connection(&space2, &fwd2, p)?.into_dyn())
                    }),
                )
                .unwrap(),
            )
            .unwrap()
        };
        let g_back = transform_connection(&mid_space, &back, &x).unwrap();
        let orig = space.gamma(&x).unwrap();
        let resid = rel_residual(orig.iter(), g_back.iter());
        prop_assert!(resid < 1e-9, "round trip residual {}", resid);
    }

    #[test]
    fn geodesic_integration_is_reversible(seed in 0u64..1000) {
        let mut r = rng(seed);
        let space = common::random_coordinate_space(&mut r, 2);
        let x0 = ChartPoint::new(vec![0.05, -0.1]).unwrap();
        let u0 = arr1(&[0.3, 0.2]);
        let settings = IntegratorSettings {
            method: OdeMethod::Rk45Adaptive { rel_tol: 1e-10, abs_tol: 1e-12 },
            max_steps: 200_000,
        };
        let fwd = integrate_geodesic(&space, &x0, &u0, (0.0, 0.8), &settings, &[0.8]).unwrap();
        let end = fwd.samples.last().unwrap();
        let back = integrate_geodesic(
            &space,
            &end.x,
            &end.u_frame,
            (0.8, 0.0),
            &settings,
            &[0.0],
        )
        .unwrap();
        let home = back.samples.last().unwrap();
        for i in 0..2 {
            prop_assert!((home.x[i] - x0[i]).abs() < 1e-9, "reversibility {}", (home.x[i] - x0[i]).abs());
        }
    }
}
