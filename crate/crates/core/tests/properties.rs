use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use kyfan_tilt::oracle::{kyfan_vector_prox, project_kyfan_dual_ball};
use kyfan_tilt::subgrad::psi_value;

fn matrix() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>, usize)> {
    (1usize..=4, 0usize..=3).prop_flat_map(|(n, extra)| {
        let m = n + extra;
        (
            proptest::collection::vec(-5.0..5.0f64, n * m),
            proptest::collection::vec(-5.0..5.0f64, n * m),
            1..=n,
        )
            .prop_map(move |(a, b, k)| (DMatrix::from_row_slice(n, m, &a), DMatrix::from_row_slice(n, m, &b), k))
    })
}

proptest! {
    #[test]
    fn kyfan_norm_is_a_norm((x, y, kappa) in matrix(), t in -3.0..3.0f64) {
        let px = psi_value(&x, kappa);
        prop_assert!(px >= -1e-12);
        prop_assert!((psi_value(&(&x * t), kappa) - t.abs() * px).abs() <= 1e-9 * (1.0 + px));
        prop_assert!(psi_value(&(&x + &y), kappa) <= px + psi_value(&y, kappa) + 1e-9);
        if kappa > 1 {
            prop_assert!(psi_value(&x, kappa - 1) <= px + 1e-12);
        }
    }

    #[test]
    fn dual_ball_projection_is_feasible_and_idempotent(v in proptest::collection::vec(-4.0..4.0f64, 1..7), k in 1usize..7) {
        let kappa = k.min(v.len());
        let z = DVector::from_vec(v);
        let p = project_kyfan_dual_ball(&z, kappa);
        prop_assert!(p.amax() <= 1.0 + 1e-12);
        prop_assert!(p.iter().map(|x| x.abs()).sum::<f64>() <= kappa as f64 + 1e-9);
        prop_assert!((project_kyfan_dual_ball(&p, kappa) - &p).norm() <= 1e-9);
    }

    #[test]
    fn vector_prox_shrinks_towards_zero(v in proptest::collection::vec(-4.0..4.0f64, 1..7), k in 1usize..7, t in 0.05..3.0f64) {
        let kappa = k.min(v.len());
        let x = DVector::from_vec(v);
        let p = kyfan_vector_prox(&x, t, kappa);
        prop_assert!(p.norm() <= x.norm() + 1e-12);
        prop_assert!((&x - &p).amax() <= t + 1e-9);
    }
}
