//! Channels, their transposes and the duality between the two pictures.

use opspace_kit::hsduality::{
    cc_iff_cp_suite, hs_correspondence_suite, pairing_defect, trace_pairing, transpose_channel, Channel, Picture,
};
use opspace_kit::numerics::random::{gaussian_matrix, random_density, random_unitary, rng_for};
use opspace_kit::numerics::{c, CMatrix, OptimizerConfig};
use opspace_kit::{Error, Verdict};
use proptest::prelude::*;

fn random_channel(seed: u64, din: usize, dout: usize) -> Channel {
    Channel::random_cptp(&mut rng_for(seed, 0), din, dout, 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // tr(ψ(x) b) = tr(x ψᵗ(b)) on random (not just basis) arguments
    #[test]
    fn transpose_is_trace_adjoint(seed in any::<u64>(), din in 1usize..4, dout in 1usize..4) {
        let psi = random_channel(seed, din, dout);
        let t = psi.transpose();
        let mut rng = rng_for(seed, 1);
        let (x, b) = (gaussian_matrix(&mut rng, din, din), gaussian_matrix(&mut rng, dout, dout));
        let lhs = trace_pairing(&psi.apply(&x).unwrap(), &b).unwrap();
        let rhs = trace_pairing(&x, &t.apply(&b).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-10);
        prop_assert!(pairing_defect(&psi, &t) < 1e-12);
    }

    #[test]
    fn transpose_is_involution(seed in any::<u64>(), din in 1usize..4, dout in 1usize..4) {
        let psi = random_channel(seed, din, dout);
        let back = psi.transpose().transpose();
        prop_assert_eq!(back.picture, psi.picture);
        prop_assert!(back.superop.max_abs_diff(&psi.superop) < 1e-14);
    }

    // CPTP ⇔ transpose is CP and unital (rectangular dimensions included)
    #[test]
    fn cptp_transposes_to_unital_cp(seed in any::<u64>(), din in 1usize..4, dout in 1usize..4) {
        let psi = random_channel(seed, din, dout);
        prop_assert_eq!(psi.is_completely_positive().verdict, Verdict::Holds);
        prop_assert_eq!(psi.is_trace_preserving(1e-9).verdict, Verdict::Holds);
        let t = psi.transpose();
        prop_assert_eq!(t.is_unital(1e-9).verdict, Verdict::Holds);
        prop_assert_eq!(t.is_completely_positive().verdict, Verdict::Holds);
    }

    // density operators go to density operators
    #[test]
    fn states_stay_states(seed in any::<u64>()) {
        let psi = random_channel(seed, 2, 3);
        let rho = random_density(&mut rng_for(seed, 2), 2);
        let out = psi.apply(&rho).unwrap();
        prop_assert!((out.trace() - c(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(opspace_kit::numerics::min_eigenvalue(&out).unwrap() > -1e-12);
    }

    #[test]
    fn composition_and_tensor_stay_cptp(seed in any::<u64>()) {
        let a = random_channel(seed, 2, 2);
        let b = random_channel(seed ^ 1, 2, 2);
        for ch in [a.compose(&b).unwrap(), a.tensor(&b)] {
            prop_assert_eq!(ch.is_completely_positive().verdict, Verdict::Holds);
            prop_assert_eq!(ch.is_trace_preserving(1e-9).verdict, Verdict::Holds);
        }
    }
}

#[test]
fn choi_of_transpose_is_swap() {
    let choi = transpose_channel(2, Picture::Schrodinger).choi();
    let swap = CMatrix::from_real_rows(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, 0.0, 1.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
    ]);
    assert!(choi.matrix.max_abs_diff(&swap) < 1e-15);
    let v = serde_json::to_value(&choi).unwrap();
    assert_eq!(v["convention"], "col-stacking");
}

#[test]
fn superop_is_column_stacking() {
    // vec(x)[i + j·d] = x[i, j]
    let u = random_unitary(&mut rng_for(3, 0), 2);
    let ch = Channel::apply_unitary(&u).unwrap();
    let x = gaussian_matrix(&mut rng_for(3, 1), 2, 2);
    let vx: Vec<_> = (0..4).map(|k| x[(k % 2, k / 2)]).collect();
    let out = ch.superop.mul_vec(&vx);
    let want = &(&u * &x) * &u.adjoint();
    for k in 0..4 {
        assert!((out[k] - want[(k % 2, k / 2)]).norm() < 1e-12);
    }
}

#[test]
fn identity_suite_holds() {
    let r = hs_correspondence_suite(&Channel::identity(2, Picture::Schrodinger), 2, &OptimizerConfig::with_seed(1).restarts(2), 1e-9, 2e-4)
        .unwrap();
    assert_eq!(r.verdict, Verdict::Holds, "{r:?}");
}

#[test]
fn transpose_positive_but_not_cp() {
    let t = transpose_channel(2, Picture::Heisenberg);
    assert_eq!(t.is_completely_positive().verdict, Verdict::Fails);
    assert_ne!(t.is_positive(32, 1).verdict, Verdict::Fails);
    let r = cc_iff_cp_suite(&t, 2, &OptimizerConfig::with_seed(2).restarts(2), 1e-6).unwrap();
    assert_eq!(r.contraction.verdict, Verdict::Fails);
    assert_eq!(r.verdict, Verdict::Holds);
}

#[test]
fn invalid_inputs() {
    assert!(matches!(Channel::state_prep(&CMatrix::identity(2)), Err(Error::NotDensity(_))));
    let not_unitary = CMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
    assert!(matches!(Channel::apply_unitary(&not_unitary), Err(Error::NotUnitary { .. })));
    let scaled = Channel::new(2, 2, Picture::Schrodinger, CMatrix::identity(4).scale_real(0.5)).unwrap();
    assert!(matches!(
        cc_iff_cp_suite(&scaled, 1, &OptimizerConfig::with_seed(1), 1e-6),
        Err(Error::NeitherUnitalNorTp)
    ));
    assert!(serde_json::from_str::<Channel>(r#"{"dimIn":2,"dimOut":2,"picture":"schrodinger","superop":{"rows":3,"cols":4,"data":[]}}"#).is_err());
}

#[test]
fn measurement_is_cptp() {
    let m = Channel::measure_basis(3).unwrap();
    assert_eq!(m.is_completely_positive().verdict, Verdict::Holds);
    assert_eq!(m.is_trace_preserving(1e-12).verdict, Verdict::Holds);
    assert_eq!(m.is_normal().verdict, Verdict::Holds);
}
