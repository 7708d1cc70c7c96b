//! Tensor norms and bilinear maps.

use opspace_kit::numerics::random::{gaussian_matrix, rng_for};
use opspace_kit::numerics::{c, operator_norm, trace_norm, OptimizerConfig};
use opspace_kit::opspace::{matrix_space, random_element, trace_class, ElementMatrix};
use opspace_kit::tensors::{
    haagerup_factorization_test, haagerup_norm, jcb_norm, linearize, mb_norm, projective_norm, trace_pair_index,
    BilinearMap, HaagerupTest, TensorElement,
};
use proptest::prelude::*;

fn cfg(seed: u64) -> OptimizerConfig {
    OptimizerConfig::with_seed(seed).restarts(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    // ‖x ⊗ y‖ = ‖x‖‖y‖ for both tensor norms on elementary tensors
    #[test]
    fn cross_norms(seed in any::<u64>()) {
        let mut rng = rng_for(seed, 0);
        let (x, y) = (gaussian_matrix(&mut rng, 2, 2), gaussian_matrix(&mut rng, 2, 2));
        let v = TensorElement::elementary(&ElementMatrix::single(x.data()), &ElementMatrix::single(y.data()));
        let want = operator_norm(&x) * operator_norm(&y);
        let m = matrix_space(2);
        for e in [projective_norm(&m, &m, &v, &cfg(seed)).unwrap(), haagerup_norm(&m, &m, &v, &cfg(seed)).unwrap()] {
            prop_assert!(e.lower <= want * (1.0 + 1e-9) && e.upper >= want * (1.0 - 1e-9));
        }
    }

    #[test]
    fn haagerup_interval_inside_projective(seed in any::<u64>()) {
        let v = TensorElement::new(4, 4, random_element(&mut rng_for(seed, 1), 1, 16)).unwrap();
        let m = matrix_space(2);
        let h = haagerup_norm(&m, &m, &v, &cfg(seed)).unwrap();
        let p = projective_norm(&m, &m, &v, &cfg(seed)).unwrap();
        prop_assert!(h.lower <= p.upper * (1.0 + 1e-9));
        prop_assert!(h.upper <= p.upper + 1e-12);
    }

    // u(x, y) is bilinear in both arguments
    #[test]
    fn bilinearity(seed in any::<u64>()) {
        let mut rng = rng_for(seed, 2);
        let u = BilinearMap::multiplication(2);
        let (x1, x2, y) = (gaussian_matrix(&mut rng, 2, 2), gaussian_matrix(&mut rng, 2, 2), gaussian_matrix(&mut rng, 2, 2));
        let s = c(0.3, -1.2);
        let lhs = u.apply((&x1.scale(s) + &x2).data(), y.data());
        let rhs: Vec<_> = u.apply(x1.data(), y.data()).iter().zip(u.apply(x2.data(), y.data()))
            .map(|(a, b)| a * s + b).collect();
        let dev = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(dev < 1e-12);
        prop_assert_eq!(u.apply(x1.data(), y.data()), (&x1 * &y).data().to_vec());
    }
}

#[test]
fn trace_pair_index_convention() {
    // (p1, q1), (r1, s1) ↦ row p1·b+r1, column q1·b+s1 of the a·b matrix units
    let (a, b) = (2, 3);
    for (c, e) in [(0, 0), (1, 5), (3, 8), (2, 4)] {
        let (p1, q1, r1, s1) = (c / a, c % a, e / b, e % b);
        assert_eq!(trace_pair_index(a, b, c, e), (p1 * b + r1) * (a * b) + q1 * b + s1);
    }
}

#[test]
fn trace_class_elementary_is_product_of_trace_norms() {
    let mut rng = rng_for(4, 0);
    let (x, y) = (gaussian_matrix(&mut rng, 2, 2), gaussian_matrix(&mut rng, 2, 2));
    let v = TensorElement::elementary(&ElementMatrix::single(x.data()), &ElementMatrix::single(y.data()));
    let e = projective_norm(&trace_class(2), &trace_class(2), &v, &cfg(4)).unwrap();
    let want = trace_norm(&x) * trace_norm(&y);
    assert!(e.lower <= want * (1.0 + 1e-9) && e.upper >= want * (1.0 - 1e-9), "{e:?}");
}

#[test]
fn multiplication_norms() {
    let u = BilinearMap::multiplication(2);
    let j = jcb_norm(&u, 1, &cfg(5)).unwrap();
    assert!((j.estimate.lower - 1.0).abs() < 1e-6);
    let m = mb_norm(&u, 2, &cfg(5)).unwrap();
    assert!(m.estimate.lower <= 1.0 + 1e-6);
    let lin = linearize(&u);
    assert_eq!(lin.coeffs.shape(), (4, 16));
}

#[test]
fn multiplication_factorizes() {
    match haagerup_factorization_test(&BilinearMap::multiplication(2), 1, &cfg(6)).unwrap() {
        HaagerupTest::Factorization { residual, cb_psi1, cb_psi2, .. } => {
            assert!(residual < 1e-9 && cb_psi1 <= 1.0 + 1e-6 && cb_psi2 <= 1.0 + 1e-6);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn haagerup_needs_concrete_factors() {
    let v = TensorElement::new(4, 4, random_element(&mut rng_for(7, 0), 1, 16)).unwrap();
    assert!(haagerup_norm(&trace_class(2), &trace_class(2), &v, &cfg(7)).is_err());
}

#[test]
fn tensor_element_json() {
    let v = TensorElement::new(4, 4, random_element(&mut rng_for(8, 0), 1, 16)).unwrap();
    let text = serde_json::to_string(&v).unwrap();
    assert!(text.contains("\"leftDim\"") && text.contains("\"rightDim\""));
    let back: TensorElement = serde_json::from_str(&text).unwrap();
    assert_eq!(back, v);
}
