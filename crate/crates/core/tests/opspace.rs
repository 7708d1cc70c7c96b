//! Operator space constructors, matrix norms and their axioms.

use opspace_kit::numerics::random::{gaussian_matrix, gaussian_vec, rng_for};
use opspace_kit::numerics::{operator_norm, trace_norm, CMatrix, OptimizerConfig};
use opspace_kit::opspace::{
    check_axioms, column_hilbert, concrete, direct_sum_1, direct_sum_inf, dual, matrix_space, random_element, trace_class,
    ElementMatrix, OperatorSpace,
};
use opspace_kit::Verdict;
use proptest::prelude::*;

fn units(d: usize) -> Vec<CMatrix> {
    (0..d * d).map(|c| CMatrix::unit(d, d, c / d, c % d)).collect()
}

fn cfg() -> OptimizerConfig {
    OptimizerConfig::with_seed(1).restarts(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // the level-n norm of a concrete space is the operator norm of the
    // assembled block matrix
    #[test]
    fn matrix_space_norm_is_assembled_norm(seed in any::<u64>(), n in 1usize..4) {
        let x = random_element(&mut rng_for(seed, 0), n, 4);
        let e = matrix_space(2).norm(&x, &cfg()).unwrap();
        let want = operator_norm(&x.assemble(&units(2)));
        prop_assert!((e.lower - want).abs() < 1e-12 && (e.upper - want).abs() < 1e-12);
    }

    #[test]
    fn direct_sum_rule_on_matrices(seed in any::<u64>(), a in 1usize..3, b in 1usize..3) {
        let mut rng = rng_for(seed, 1);
        let (x, y) = (random_element(&mut rng, a, 4), random_element(&mut rng, b, 4));
        let m = matrix_space(2);
        let s = m.norm(&x.direct_sum(&y).unwrap(), &cfg()).unwrap().value();
        let want = m.norm(&x, &cfg()).unwrap().value().max(m.norm(&y, &cfg()).unwrap().value());
        prop_assert!((s - want).abs() < 1e-12);
    }

    #[test]
    fn bimodule_rule_on_matrices(seed in any::<u64>(), n in 1usize..3, k in 1usize..3) {
        let mut rng = rng_for(seed, 2);
        let x = random_element(&mut rng, n, 4);
        let alpha = gaussian_matrix(&mut rng, k, n);
        let beta = gaussian_matrix(&mut rng, n, k);
        let m = matrix_space(2);
        let lhs = m.norm(&x.sandwich(&alpha, &beta).unwrap(), &cfg()).unwrap().value();
        let rhs = operator_norm(&alpha) * m.norm(&x, &cfg()).unwrap().value() * operator_norm(&beta);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    // level 1 of the trace class is the trace norm
    #[test]
    fn trace_class_level_one(seed in any::<u64>()) {
        let a = gaussian_matrix(&mut rng_for(seed, 3), 2, 2);
        let e = trace_class(2).norm(&ElementMatrix::single(a.data()), &cfg()).unwrap();
        let want = trace_norm(&a);
        prop_assert!(e.lower <= want * (1.0 + 1e-9) && e.upper >= want * (1.0 - 1e-9));
        prop_assert!(e.gap() <= 1e-6 * want);
    }

    // column Hilbert space: level 1 is the Euclidean norm
    #[test]
    fn column_space_level_one(seed in any::<u64>()) {
        let v = gaussian_vec(&mut rng_for(seed, 4), 3);
        let e = column_hilbert(3).norm(&ElementMatrix::single(&v), &cfg()).unwrap();
        let want = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!((e.value() - want).abs() < 1e-10);
    }
}

#[test]
fn swap_arrangement_has_norm_one() {
    // block (i, j) = e_ji assembles to the swap
    let x = ElementMatrix::from_entries(2, 4, |i, j| units(2)[j * 2 + i].data().to_vec());
    assert!((matrix_space(2).norm(&x, &cfg()).unwrap().value() - 1.0).abs() < 1e-12);
    let y = ElementMatrix::from_entries(2, 4, |i, j| units(2)[i * 2 + j].data().to_vec());
    assert!((matrix_space(2).norm(&y, &cfg()).unwrap().value() - 2.0).abs() < 1e-12);
}

#[test]
fn sums_of_scalars() {
    let l1 = direct_sum_1(vec![matrix_space(1), matrix_space(1)]);
    let linf = direct_sum_inf(vec![matrix_space(1), matrix_space(1)]);
    let x = ElementMatrix::single(&[opspace_kit::numerics::c(3.0, 0.0), opspace_kit::numerics::c(0.0, -4.0)]);
    assert!((l1.norm(&x, &cfg()).unwrap().value() - 7.0).abs() < 1e-6);
    assert!((linf.norm(&x, &cfg()).unwrap().value() - 4.0).abs() < 1e-12);
}

#[test]
fn dual_of_dual_matrix_space_is_exact() {
    let dd = dual(dual(matrix_space(2)));
    let x = random_element(&mut rng_for(5, 0), 2, 4);
    let e = dd.norm(&x, &cfg()).unwrap();
    let want = operator_norm(&x.assemble(&units(2)));
    assert!(e.lower <= want + 1e-9 && e.upper >= want - 1e-9);
}

#[test]
fn space_json_roundtrip() {
    let spaces = [
        matrix_space(2),
        trace_class(2),
        column_hilbert(2),
        direct_sum_inf(vec![matrix_space(1), trace_class(2)]),
        concrete(2, 2, vec![CMatrix::identity(2)]).unwrap(),
    ];
    for s in spaces {
        let text = serde_json::to_string(&s).unwrap();
        let back: OperatorSpace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s, "{text}");
    }
}

#[test]
fn dependent_basis_rejected() {
    assert!(concrete(2, 2, vec![CMatrix::identity(2), CMatrix::identity(2)]).is_err());
}

#[test]
fn element_level_mismatch_rejected() {
    let x = ElementMatrix::zeros(2, 3);
    assert!(matrix_space(2).norm(&x, &cfg()).is_err());
}

#[test]
fn axioms_hold_on_column_space() {
    let r = check_axioms(&column_hilbert(2), 2, 5, &cfg(), 1e-9).unwrap();
    assert_eq!(r.verdict, Verdict::Holds, "{r:?}");
}
