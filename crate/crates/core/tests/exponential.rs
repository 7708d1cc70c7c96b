//! The free ℓ¹ construction over unit balls and the three quantum primitives.

use opspace_kit::exponential::{
    adjoint_l, apply_l, ball_preservation_defect, ctrl_l, ctrl_norm_identity, u_apply, u_ctrl, BallFunction,
    FreeL1Element,
};
use opspace_kit::numerics::random::{gaussian_matrix, gaussian_vec, random_contraction, rng_for};
use opspace_kit::numerics::{c, CMatrix};
use opspace_kit::opspace::{matrix_space, rect_matrix_space};
use opspace_kit::Error;
use proptest::prelude::*;

fn max_dev(a: &[opspace_kit::numerics::C64], b: &[opspace_kit::numerics::C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // the linearization is linear on finite sums of ball points
    #[test]
    fn linearization_of_combinations(seed in any::<u64>()) {
        let mut rng = rng_for(seed, 0);
        let m = matrix_space(2);
        let f = BallFunction::new(m.clone(), m.clone(), |x| {
            let a = CMatrix::from_vec(2, 2, x.to_vec()).unwrap();
            (&a * &a.adjoint()).data().to_vec()
        });
        let (x, y) = (random_contraction(&mut rng, 2, 2, 1.0), random_contraction(&mut rng, 2, 2, 1.0));
        let (s, t) = (c(0.4, 0.1), c(-1.5, 0.0));
        let e = FreeL1Element::promote(&m, x.data()).unwrap().scale(s)
            .add(&FreeL1Element::promote(&m, y.data()).unwrap().scale(t)).unwrap();
        prop_assert!((e.norm() - (s.norm() + t.norm())).abs() < 1e-12);
        let got = f.linearize(&e).unwrap();
        let want: Vec<_> = f.eval(x.data()).iter().zip(f.eval(y.data())).map(|(a, b)| a * s + b * t).collect();
        prop_assert!(max_dev(&got, &want) < 1e-12);
    }

    #[test]
    fn primitives_preserve_balls(seed in any::<u64>(), rows in 1usize..4, cols in 1usize..4) {
        let f = random_contraction(&mut rng_for(seed, 1), rows, cols, 1.0);
        prop_assert!(ball_preservation_defect(&f) <= 1e-9);
    }

    // ‖u_ctrl(f)(|0⟩h₀ + |1⟩h₁)‖² = ‖h₀‖² + ‖f h₁‖²
    #[test]
    fn ctrl_norm(seed in any::<u64>()) {
        let mut rng = rng_for(seed, 2);
        let f = gaussian_matrix(&mut rng, 3, 3);
        let k = gaussian_vec(&mut rng, 6);
        let (lhs, rhs) = ctrl_norm_identity(&f, &k).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10 * rhs.max(1.0));
    }

    // linearized primitives agree with the primitives on promoted points
    #[test]
    fn linearized_primitives(seed in any::<u64>()) {
        let mut rng = rng_for(seed, 3);
        let f = random_contraction(&mut rng, 2, 2, 1.0);
        let g = random_contraction(&mut rng, 3, 2, 1.0);
        let e = FreeL1Element::promote(&matrix_space(2), f.data()).unwrap();
        prop_assert!(ctrl_l(&e, 2).unwrap().max_abs_diff(&u_ctrl(&f).unwrap()) < 1e-14);
        let eg = FreeL1Element::promote(&rect_matrix_space(3, 2), g.data()).unwrap();
        prop_assert!(adjoint_l(&eg, 3, 2).unwrap().max_abs_diff(&g.adjoint()) < 1e-14);
        prop_assert!(apply_l(&eg, 3, 2).unwrap().superop.max_abs_diff(&u_apply(&g).superop) < 1e-14);
    }
}

#[test]
fn promote_rejects_points_outside_the_ball() {
    let big = CMatrix::identity(2).scale_real(1.5);
    assert!(matches!(
        FreeL1Element::promote(&matrix_space(2), big.data()),
        Err(Error::OutsideUnitBall { .. })
    ));
}

#[test]
fn escaping_function_is_reported() {
    let m = matrix_space(2);
    let f = BallFunction::new(m.clone(), m.clone(), |x| x.iter().map(|z| z * 3.0).collect());
    let e = FreeL1Element::promote(&m, CMatrix::identity(2).data()).unwrap();
    assert!(matches!(f.linearize(&e), Err(Error::BallEscape { index: 0, .. })));
}

#[test]
fn equal_points_merge() {
    let m = matrix_space(2);
    let x = CMatrix::identity(2).scale_real(0.5);
    let e = FreeL1Element::promote(&m, x.data()).unwrap();
    let sum = e.add(&e).unwrap();
    assert_eq!(sum.support.len(), 1);
    assert!((sum.norm() - 2.0).abs() < 1e-15);
}

#[test]
fn free_element_json() {
    let m = matrix_space(2);
    let e = FreeL1Element::promote(&m, CMatrix::identity(2).scale_real(0.5).data()).unwrap();
    let text = serde_json::to_string(&e).unwrap();
    let back: FreeL1Element = serde_json::from_str(&text).unwrap();
    assert_eq!(back, e);
}
