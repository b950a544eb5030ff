//! Property-based invariants across the geometric kernels.

use finred_core::discrete_action::{self, DiscreteLoop};
use finred_core::flat_geometry::{dist, exp_map, log_map, CotangentPoint, FlatTorus, TorusPoint};
use finred_core::hamiltonians::{flow, flow_differential, RadialProfile};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn torus2() -> FlatTorus {
    FlatTorus::new(vec![1.0, 2.5]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exp_log_roundtrip(ax in 0.0..1.0f64, ay in 0.0..2.5f64, bx in 0.0..1.0f64, by in 0.0..2.5f64) {
        let t = torus2();
        let a = TorusPoint::new(&t, DVector::from_row_slice(&[ax, ay]));
        let b = TorusPoint::new(&t, DVector::from_row_slice(&[bx, by]));
        prop_assume!(dist(&t, &a, &b) < t.injectivity_radius() * 0.999);
        let v = log_map(&t, &a, &b).unwrap();
        prop_assert!((v.norm() - dist(&t, &a, &b)).abs() < 1e-13);
        let back = exp_map(&t, &a, &v);
        prop_assert!(dist(&t, &back, &b) < 1e-12);
    }

    #[test]
    fn flow_group_action_and_symplectic(
        qx in 0.0..1.0f64, qy in 0.0..2.5f64,
        px in -1.0..1.0f64, py in -1.0..1.0f64,
        s in 0.0..0.5f64, u in 0.0..0.5f64,
    ) {
        let t = torus2();
        let pr = RadialProfile::quadratic_capped(1.5, 0.2).unwrap();
        let z = CotangentPoint::new(
            TorusPoint::new(&t, DVector::from_row_slice(&[qx, qy])),
            DVector::from_row_slice(&[px, py]),
        );
        let one = flow(&t, &pr, &flow(&t, &pr, &z, s), u);
        let two = flow(&t, &pr, &z, s + u);
        prop_assert!(dist(&t, &one.base, &two.base) < 1e-12);
        prop_assert!((one.fiber.clone() - &two.fiber).norm() < 1e-12);
        prop_assert!((one.fiber.norm() - z.fiber.norm()).abs() < 1e-15);

        let d = flow_differential(&t, &pr, &z, s);
        let mut j = DMatrix::zeros(4, 4);
        for i in 0..2 {
            j[(i, 2 + i)] = -1.0;
            j[(2 + i, i)] = 1.0;
        }
        prop_assert!((d.transpose() * &j * &d - &j).norm() < 1e-9);
    }

    #[test]
    fn pseudo_gradient_inequality(seed in 0u64..5_000) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t = FlatTorus::circle(1.0).unwrap();
        let pr = RadialProfile::quadratic_capped(0.7, 0.1).unwrap();
        let lp = finred_core::sampling::random_admissible_loop(&t, 12, 0.6, 0.45, &mut rng);
        let g = discrete_action::gradient(&t, &pr, &lp).unwrap();
        let x = discrete_action::pseudo_gradient(&t, &pr, &lp).unwrap();
        prop_assert!(x.dot(&g) >= x.norm_squared() - 1e-12);
        let gp_sq: f64 = (0..12).map(|j| g[2 * j + 1] * g[2 * j + 1]).sum();
        prop_assert!(x.norm_squared() >= gp_sq - 1e-12);
    }

    #[test]
    fn embed_preserves_action_and_wire_roundtrips(seed in 0u64..5_000) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t = torus2();
        let pr = RadialProfile::quadratic_capped(0.7, 0.1).unwrap();
        let lp = finred_core::sampling::random_admissible_loop(&t, 10, 0.5, 0.4, &mut rng);
        let emb = discrete_action::embed_add_node(&t, &pr, &lp).unwrap();
        let a0 = discrete_action::action(&t, &pr, &lp).unwrap();
        let a1 = discrete_action::action(&t, &pr, &emb).unwrap();
        prop_assert!((a0 - a1).abs() < 1e-10 * (1.0 + a0.abs()));

        let wire = discrete_action::LoopWire::from_loop(&lp);
        let json = serde_json::to_string(&wire).unwrap();
        let back: discrete_action::LoopWire = serde_json::from_str(&json).unwrap();
        let lp2: DiscreteLoop = back.to_loop(&t).unwrap();
        prop_assert_eq!(lp, lp2);
    }
}
