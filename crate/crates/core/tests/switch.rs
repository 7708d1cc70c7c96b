//! The quantum switch as a bilinear map.

use opspace_kit::numerics::random::{gaussian_matrix, rng_for};
use opspace_kit::numerics::{c, kron, operator_norm, CMatrix, OptimizerConfig};
use opspace_kit::switch::{
    no_haagerup_factorization, switch_jcb_certificate, switch_mb_witness, SwitchInstance, SwitchVerdict, MAX_DIM,
};
use proptest::prelude::*;

fn flip(d: usize) -> CMatrix {
    kron(&CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]), &CMatrix::identity(d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // (X ⊗ 1) u(f, g) (X ⊗ 1) = u(g, f)
    #[test]
    fn swap_symmetry(seed in any::<u64>(), d in 1usize..5) {
        let s = SwitchInstance::build(d).unwrap();
        let mut rng = rng_for(seed, 0);
        let (f, g) = (gaussian_matrix(&mut rng, d, d), gaussian_matrix(&mut rng, d, d));
        let lhs = &(&flip(d) * &s.apply(&f, &g).unwrap()) * &flip(d);
        prop_assert!(lhs.max_abs_diff(&s.apply(&g, &f).unwrap()) < 1e-12);
    }

    #[test]
    fn bilinear(seed in any::<u64>(), d in 1usize..4) {
        let s = SwitchInstance::build(d).unwrap();
        let mut rng = rng_for(seed, 1);
        let (f1, f2, g) = (gaussian_matrix(&mut rng, d, d), gaussian_matrix(&mut rng, d, d), gaussian_matrix(&mut rng, d, d));
        let a = c(0.7, -0.2);
        let lhs = s.apply(&(&f1.scale(a) + &f2), &g).unwrap();
        let rhs = &s.apply(&f1, &g).unwrap().scale(a) + &s.apply(&f2, &g).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        prop_assert!(s.apply(&f1, &g).unwrap().max_abs_diff(&SwitchInstance::direct(&f1, &g)) < 1e-12);
    }

    // contractive on elementary pairs of contractions
    #[test]
    fn contractive_on_contractions(seed in any::<u64>(), d in 1usize..4) {
        let s = SwitchInstance::build(d).unwrap();
        let mut rng = rng_for(seed, 2);
        let f = opspace_kit::numerics::random::random_contraction(&mut rng, d, d, 1.0);
        let g = opspace_kit::numerics::random::random_contraction(&mut rng, d, d, 1.0);
        prop_assert!(operator_norm(&s.apply(&f, &g).unwrap()) <= 1.0 + 1e-12);
    }
}

#[test]
fn witness_is_monotone_and_exact() {
    for d in 1..=MAX_DIM {
        let s = SwitchInstance::build(d).unwrap();
        let values: Vec<f64> = (1..=d).map(|n| switch_mb_witness(&s, n).unwrap().mb_lower).collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0]));
        for (n, v) in values.iter().enumerate() {
            assert!((v - (n + 1) as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn dimension_limits() {
    assert!(SwitchInstance::build(0).is_err());
    assert!(SwitchInstance::build(MAX_DIM + 1).is_err());
    assert!(switch_mb_witness(&SwitchInstance::build(2).unwrap(), 3).is_err());
}

#[test]
fn scaled_switch_violates() {
    let cfg = OptimizerConfig::with_seed(3).restarts(2);
    let c = switch_jcb_certificate(&SwitchInstance::build(2).unwrap().scaled(2.0), 1, &cfg).unwrap();
    assert!(c.violation && !c.consistent_with_cb_norm_one);
}

#[test]
fn obstruction_bounds() {
    let cfg = OptimizerConfig::with_seed(4).restarts(2);
    for d in 2..=3 {
        let r = no_haagerup_factorization(&SwitchInstance::build(d).unwrap(), &cfg).unwrap();
        assert_eq!(r.verdict, SwitchVerdict::Obstructed);
        assert!(r.mb_lower >= d as f64 - 1e-12);
    }
}
