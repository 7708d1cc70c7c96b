//! The quantum switch `u(f, g) = p₀ ⊗ fg + p₁ ⊗ gf` as a bilinear map
//! `M_d × M_d → M_{2d}`: contractive on the projective tensor product, and
//! with multiplicatively bounded norm at least `n` for every `n ≤ d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::cmatrix::vec_norm;
use crate::numerics::{kron, operator_norm, CMatrix, OptimizerConfig, C64, ONE, ZERO};
use crate::opspace::{matrix_space, ElementMatrix};
use crate::tensors::{haagerup_factorization_test_seeded, jcb_norm_seeded, BilinearMap, BilinearWitness, HaagerupTest};

/// Default cap on `dim H`.
pub const MAX_DIM: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchInstance {
    pub dim_h: usize,
    pub map: BilinearMap,
}

impl SwitchInstance {
    /// Coefficients on matrix units:
    /// `e_ab e_st = δ_bs e_at` lands in the `p₀` block and
    /// `e_st e_ab = δ_ta e_sb` in the `p₁` block.
    pub fn build(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("dimension must be positive".into()));
        }
        if d > MAX_DIM {
            return Err(Error::Invalid(format!("dimension above the cap of {MAX_DIM}")));
        }
        let m = d * d;
        let k = 2 * d;
        let mut coeffs = CMatrix::zeros(k * k, m * m);
        for (a, b) in (0..d).flat_map(|a| (0..d).map(move |b| (a, b))) {
            for (s, t) in (0..d).flat_map(|s| (0..d).map(move |t| (s, t))) {
                let col = (a * d + b) * m + s * d + t;
                if b == s {
                    coeffs[(a * k + t, col)] += ONE;
                }
                if t == a {
                    coeffs[((d + s) * k + d + b, col)] += ONE;
                }
            }
        }
        let space = matrix_space(d);
        let map = BilinearMap::new(space.clone(), space, matrix_space(k), coeffs)?;
        let inst = Self { dim_h: d, map };
        let id = CMatrix::identity(d);
        let dev = (&inst.apply(&id, &id)? - &CMatrix::identity(k)).max_abs();
        debug_assert!(dev == 0.0, "switch of identities is the identity");
        Ok(inst)
    }

    /// `u(f, g)` as a `2d × 2d` matrix.
    pub fn apply(&self, f: &CMatrix, g: &CMatrix) -> Result<CMatrix> {
        let d = self.dim_h;
        if f.shape() != (d, d) || g.shape() != (d, d) {
            return Err(Error::Dimension(format!("switch inputs must be {d}x{d}")));
        }
        let v = self.map.apply(f.data(), g.data());
        CMatrix::from_vec(2 * d, 2 * d, v)
    }

    /// `p₀ ⊗ fg + p₁ ⊗ gf` assembled directly from the matrices.
    pub fn direct(f: &CMatrix, g: &CMatrix) -> CMatrix {
        let p0 = CMatrix::unit(2, 2, 0, 0);
        let p1 = CMatrix::unit(2, 2, 1, 1);
        &kron(&p0, &(f * g)) + &kron(&p1, &(g * f))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut map = self.map.clone();
        map.coeffs = map.coeffs.scale_real(s);
        Self {
            dim_h: self.dim_h,
            map,
        }
    }

    /// `x = [δ_ij 1]` at level 1.
    fn identity_element(&self) -> ElementMatrix {
        ElementMatrix::single(CMatrix::identity(self.dim_h).data())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchVerdict {
    Obstructed,
    Factorized,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JcbCertificate {
    pub label: String,
    pub dim_h: usize,
    pub max_level: usize,
    pub lower: f64,
    /// Certified upper bound through the spatial tensor product (loose).
    pub upper: f64,
    pub levels: (usize, usize),
    pub witness: Option<BilinearWitness>,
    /// Some witness exceeds `1 + 1e-6`.
    pub violation: bool,
    /// Lower bound within `1e-4` of one and no violation.
    pub consistent_with_cb_norm_one: bool,
}

/// Jointly completely bounded lower bound, warm-started at `id ⊗ id`.
pub fn switch_jcb_certificate(s: &SwitchInstance, max_level: usize, cfg: &OptimizerConfig) -> Result<JcbCertificate> {
    let id = s.identity_element();
    let report = jcb_norm_seeded(&s.map, max_level, cfg, &[(id.clone(), id)])?;
    let lower = report.estimate.lower;
    let violation = lower > 1.0 + 1e-6;
    Ok(JcbCertificate {
        label: "the switch is a complete contraction on the projective tensor product".into(),
        dim_h: s.dim_h,
        max_level,
        lower,
        upper: report.estimate.upper,
        levels: report.levels,
        witness: report.witness,
        violation,
        consistent_with_cb_norm_one: !violation && (lower - 1.0).abs() <= 1e-4,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SwitchReport {
    pub dim_h: usize,
    pub n: usize,
    pub mb_lower: f64,
    /// `[f_ij]` assembled as an `nd × nd` matrix.
    pub witness_f: CMatrix,
    #[serde(with = "crate::numerics::json::cvec")]
    pub witness_k: Vec<C64>,
    pub f_norm: f64,
    pub k_norm: f64,
    pub verdict: SwitchVerdict,
}

/// `f_ij = e_ji` for `i, j < n`, as a level-`n` element of `M_d`.
pub fn mb_witness_element(d: usize, n: usize) -> ElementMatrix {
    ElementMatrix::from_entries(n, d * d, |i, j| {
        let mut v = vec![ZERO; d * d];
        v[j * d + i] = ONE;
        v
    })
}

/// Evaluates `‖u_(n)(f, f) k‖` on the explicit witness with `k = |1⟩ ⊗ e₀`
/// in the first block.
pub fn switch_mb_witness(s: &SwitchInstance, n: usize) -> Result<SwitchReport> {
    let d = s.dim_h;
    if n == 0 || n > d {
        return Err(Error::Invalid(format!("witness level must lie in 1..={d}")));
    }
    let f = mb_witness_element(d, n);
    let basis_in = (0..d * d).map(|c| CMatrix::unit(d, d, c / d, c % d)).collect::<Vec<_>>();
    let k2 = 2 * d;
    let basis_out = (0..k2 * k2).map(|c| CMatrix::unit(k2, k2, c / k2, c % k2)).collect::<Vec<_>>();
    let witness_f = f.assemble(&basis_in);
    let big = s.map.mb_amplify(&f, &f)?.assemble(&basis_out);
    let mut k = vec![ZERO; n * k2];
    k[d] = ONE;
    let value = vec_norm(&big.mul_vec(&k));
    let f_norm = operator_norm(&witness_f);
    let k_norm = vec_norm(&k);
    let verdict = if value > 1.0 + 1e-9 && f_norm <= 1.0 + 1e-12 {
        SwitchVerdict::Obstructed
    } else {
        SwitchVerdict::Inconclusive
    };
    Ok(SwitchReport {
        dim_h: d,
        n,
        mb_lower: value,
        witness_f,
        witness_k: k,
        f_norm,
        k_norm,
        verdict,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FactorizationReport {
    pub label: String,
    pub dim_h: usize,
    pub mb_lower: f64,
    pub witness: SwitchReport,
    /// Present when the search ran (only needed without an exact witness).
    pub search: Option<HaagerupTest>,
    pub verdict: SwitchVerdict,
}

/// The switch factors as `ψ₁(f)ψ₂(g)` with complete contractions only in
/// the scalar case; otherwise the exact witness at `n = d` refutes it.
pub fn no_haagerup_factorization(s: &SwitchInstance, cfg: &OptimizerConfig) -> Result<FactorizationReport> {
    let d = s.dim_h;
    let witness = switch_mb_witness(s, d)?;
    let label = "no product factorization by complete contractions exists for the switch".to_string();
    if witness.verdict == SwitchVerdict::Obstructed {
        return Ok(FactorizationReport {
            label,
            dim_h: d,
            mb_lower: witness.mb_lower,
            witness,
            search: None,
            verdict: SwitchVerdict::Obstructed,
        });
    }
    let f = mb_witness_element(d, d);
    let test = haagerup_factorization_test_seeded(&s.map, 1, cfg, &[(f.clone(), f)])?;
    let (verdict, mb_lower) = match &test {
        HaagerupTest::Factorization { .. } => (SwitchVerdict::Factorized, witness.mb_lower),
        HaagerupTest::Obstruction { mb_lower, verdict, .. } => (
            if *verdict == crate::verdict::Verdict::Fails {
                SwitchVerdict::Obstructed
            } else {
                SwitchVerdict::Inconclusive
            },
            mb_lower.max(witness.mb_lower),
        ),
    };
    Ok(FactorizationReport {
        label,
        dim_h: d,
        mb_lower,
        witness,
        search: Some(test),
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::{gaussian_matrix, rng_for};

    fn pauli() -> (CMatrix, CMatrix) {
        (
            CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]),
            CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]),
        )
    }

    #[test]
    fn build_matches_definition() {
        let s = SwitchInstance::build(3).unwrap();
        let mut rng = rng_for(1, 0);
        for _ in 0..5 {
            let f = gaussian_matrix(&mut rng, 3, 3);
            let g = gaussian_matrix(&mut rng, 3, 3);
            assert!(s.apply(&f, &g).unwrap().approx_eq(&SwitchInstance::direct(&f, &g), 1e-13));
        }
        let id = CMatrix::identity(3);
        assert!(s.apply(&id, &id).unwrap().approx_eq(&CMatrix::identity(6), 0.0));
        let f = gaussian_matrix(&mut rng, 3, 3);
        assert!(s.apply(&f, &id).unwrap().approx_eq(&kron(&CMatrix::identity(2), &f), 1e-14));
    }

    #[test]
    fn pauli_example_has_norm_one() {
        let s = SwitchInstance::build(2).unwrap();
        let (x, z) = pauli();
        let out = s.apply(&x, &z).unwrap();
        assert!((operator_norm(&out) - 1.0).abs() < 1e-14);
        let xz = &x * &z;
        assert!(out.submatrix(2, 2, 2, 2).approx_eq(&xz.scale_real(-1.0), 0.0));
    }

    #[test]
    fn swap_symmetry() {
        let s = SwitchInstance::build(2).unwrap();
        let mut rng = rng_for(2, 0);
        let f = gaussian_matrix(&mut rng, 2, 2);
        let g = gaussian_matrix(&mut rng, 2, 2);
        let flip = kron(&pauli().0, &CMatrix::identity(2));
        let lhs = s.apply(&f, &g).unwrap();
        let rhs = &(&flip * &s.apply(&g, &f).unwrap()) * &flip;
        assert!(lhs.approx_eq(&rhs, 1e-14));
    }

    #[test]
    fn mb_witness_values() {
        for d in 1..=4 {
            let s = SwitchInstance::build(d).unwrap();
            let mut prev = 0.0;
            for n in 1..=d {
                let r = switch_mb_witness(&s, n).unwrap();
                assert!((r.mb_lower - n as f64).abs() < 1e-12);
                assert!(r.f_norm <= 1.0 + 1e-12);
                assert_eq!(r.k_norm, 1.0);
                assert!(r.mb_lower >= prev);
                prev = r.mb_lower;
            }
            assert!(switch_mb_witness(&s, d + 1).is_err());
        }
    }

    #[test]
    fn jcb_certificates() {
        let cfg = OptimizerConfig::with_seed(3).restarts(2);
        let s1 = SwitchInstance::build(1).unwrap();
        let c = switch_jcb_certificate(&s1, 2, &cfg).unwrap();
        assert!(c.consistent_with_cb_norm_one, "{c:?}");
        let s2 = SwitchInstance::build(2).unwrap();
        let c = switch_jcb_certificate(&s2, 1, &cfg).unwrap();
        assert!(c.consistent_with_cb_norm_one, "{c:?}");
        let c = switch_jcb_certificate(&s2.scaled(2.0), 1, &cfg).unwrap();
        assert!(c.violation);
    }

    #[test]
    fn factorization_reports() {
        let cfg = OptimizerConfig::with_seed(4).restarts(2);
        let r = no_haagerup_factorization(&SwitchInstance::build(2).unwrap(), &cfg).unwrap();
        assert_eq!(r.verdict, SwitchVerdict::Obstructed);
        assert!((r.mb_lower - 2.0).abs() < 1e-12);
        let r = no_haagerup_factorization(&SwitchInstance::build(3).unwrap(), &cfg).unwrap();
        assert!((r.mb_lower - 3.0).abs() < 1e-12);
        let r = no_haagerup_factorization(&SwitchInstance::build(1).unwrap(), &cfg).unwrap();
        assert_eq!(r.verdict, SwitchVerdict::Factorized, "{r:?}");
    }

    #[test]
    fn report_json_fields() {
        let r = switch_mb_witness(&SwitchInstance::build(2).unwrap(), 2).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["dimH", "n", "mbLower", "witnessF", "witnessK", "verdict"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["verdict"], "obstructed");
    }
}
