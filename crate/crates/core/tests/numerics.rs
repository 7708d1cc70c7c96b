//! Dense linear algebra against independent oracles, plus JSON interchange.

use opspace_kit::numerics::json::to_string_17;
use opspace_kit::numerics::linalg::{hermitian_eigen, inverse, svd};
use opspace_kit::numerics::random::{gaussian_matrix, random_unitary, rng_for};
use opspace_kit::numerics::{c, kron, min_eigenvalue, operator_norm, trace_norm, CMatrix, OptimizerConfig};
use proptest::prelude::*;

/// Power iteration on `a† a`, independent of the SVD routine.
fn power_norm(a: &CMatrix) -> f64 {
    let g = &a.adjoint() * a;
    let mut v = vec![c(1.0, 0.3); a.cols()];
    let mut lam = 0.0;
    for _ in 0..2000 {
        let w = g.mul_vec(&v);
        let n = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n == 0.0 {
            return 0.0;
        }
        lam = n;
        v = w.into_iter().map(|z| z / n).collect();
    }
    lam.sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn svd_reconstructs(seed in any::<u64>(), rows in 1usize..5, cols in 1usize..5) {
        let a = gaussian_matrix(&mut rng_for(seed, 0), rows, cols);
        let d = svd(&a);
        let k = d.s.len();
        let s = CMatrix::from_fn(k, k, |i, j| if i == j { c(d.s[i], 0.0) } else { c(0.0, 0.0) });
        let back = &(&d.u * &s) * &d.v.adjoint();
        prop_assert!(back.max_abs_diff(&a) < 1e-10);
        prop_assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn operator_norm_matches_power_iteration(seed in any::<u64>(), n in 1usize..5) {
        let a = gaussian_matrix(&mut rng_for(seed, 1), n, n);
        let p = power_norm(&a);
        prop_assert!((operator_norm(&a) - p).abs() <= 1e-6 * p.max(1.0));
    }

    #[test]
    fn norm_inequalities(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = rng_for(seed, 2);
        let a = gaussian_matrix(&mut rng, n, n);
        let b = gaussian_matrix(&mut rng, 3, 2);
        prop_assert!(operator_norm(&a) <= trace_norm(&a) + 1e-12);
        let kab = operator_norm(&kron(&a, &b));
        prop_assert!((kab - operator_norm(&a) * operator_norm(&b)).abs() <= 1e-9 * kab.max(1.0));
        let tab = trace_norm(&kron(&a, &b));
        prop_assert!((tab - trace_norm(&a) * trace_norm(&b)).abs() <= 1e-9 * tab.max(1.0));
    }

    #[test]
    fn unitary_invariance(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = rng_for(seed, 3);
        let a = gaussian_matrix(&mut rng, n, n);
        let u = random_unitary(&mut rng, n);
        let v = random_unitary(&mut rng, n);
        let b = &(&u * &a) * &v;
        prop_assert!((operator_norm(&a) - operator_norm(&b)).abs() < 1e-10 * operator_norm(&a).max(1.0));
        prop_assert!((trace_norm(&a) - trace_norm(&b)).abs() < 1e-10 * trace_norm(&a).max(1.0));
    }

    #[test]
    fn hermitian_eigen_reconstructs(seed in any::<u64>(), n in 1usize..5) {
        let g = gaussian_matrix(&mut rng_for(seed, 4), n, n);
        let h = &g + &g.adjoint();
        let e = hermitian_eigen(&h);
        let d = CMatrix::from_fn(n, n, |i, j| if i == j { c(e.values[i], 0.0) } else { c(0.0, 0.0) });
        let back = &(&e.vectors * &d) * &e.vectors.adjoint();
        prop_assert!(back.max_abs_diff(&h) < 1e-10);
        let min = e.values.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!((min_eigenvalue(&h).unwrap() - min).abs() < 1e-12);
    }

    #[test]
    fn inverse_is_two_sided(seed in any::<u64>(), n in 1usize..5) {
        let a = gaussian_matrix(&mut rng_for(seed, 5), n, n);
        let inv = inverse(&a).unwrap();
        prop_assert!((&a * &inv).max_abs_diff(&CMatrix::identity(n)) < 1e-8);
    }

    #[test]
    fn matrix_json_roundtrip(seed in any::<u64>()) {
        let a = gaussian_matrix(&mut rng_for(seed, 6), 2, 3);
        let back: CMatrix = serde_json::from_str(&to_string_17(&a).unwrap()).unwrap();
        prop_assert_eq!(back, a);
    }
}

#[test]
fn kron_index_convention() {
    // kron(a, b)[(i,k),(j,l)] = a[i,j] b[k,l] with row i·q+k, column j·q+l
    let mut rng = rng_for(7, 0);
    let a = gaussian_matrix(&mut rng, 2, 3);
    let b = gaussian_matrix(&mut rng, 4, 5);
    let k = kron(&a, &b);
    for (i, j, p, q) in [(1, 2, 3, 4), (0, 0, 0, 0), (1, 0, 2, 1)] {
        assert_eq!(k[(i * 4 + p, j * 5 + q)], a[(i, j)] * b[(p, q)]);
    }
}

#[test]
fn optimizer_config_rejects_zero_restarts() {
    assert!(OptimizerConfig::with_seed(1).restarts(0).validate().is_err());
}

#[test]
fn non_hermitian_eigen_rejected() {
    let a = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
    assert!(min_eigenvalue(&a).is_err());
}
