//! Sampled checks of the matrix-norm axioms.
//!
//! Every oracle returns a certified interval, so an axiom is falsified only
//! when the intervals are inconsistent with it: for the direct-sum rule
//! `‖x ⊕ y‖ = max(‖x‖, ‖y‖)` both inequalities are tested against the
//! opposite bounds, and for `‖αxβ‖ ≤ ‖α‖‖x‖‖β‖` the lower bound of the left
//! side is compared with the upper bound of the right side.

use rand::Rng;
use serde::Serialize;

use super::element::ElementMatrix;
use super::space::OperatorSpace;
use crate::error::Result;
use crate::numerics::random::{gaussian, gaussian_matrix, gaussian_vec, rng_for};
use crate::numerics::{operator_norm, CMatrix, OptimizerConfig, ONE, ZERO};
use crate::verdict::Verdict;

/// Gaussian element with entries of unit scale.
pub fn random_element<R: Rng + ?Sized>(rng: &mut R, level: usize, dim: usize) -> ElementMatrix {
    let s = 1.0 / ((level * level * dim).max(1) as f64).sqrt();
    let v = gaussian_vec(rng, level * level * dim).into_iter().map(|z| z * s).collect();
    ElementMatrix::new(level, dim, v).expect("finite sample")
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AxiomCheck {
    pub label: String,
    pub samples: usize,
    /// Largest amount by which the intervals contradict the axiom.
    pub worst_violation: f64,
    /// Largest interval width met; wide intervals make a pass weak.
    pub worst_gap: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AxiomReport {
    pub space: String,
    pub max_level: usize,
    pub checks: Vec<AxiomCheck>,
    pub verdict: Verdict,
}

struct Tally {
    label: String,
    samples: usize,
    worst: f64,
    gap: f64,
}

impl Tally {
    fn new(label: &str) -> Self {
        Self {
            label: label.into(),
            samples: 0,
            worst: 0.0,
            gap: 0.0,
        }
    }

    fn record(&mut self, violation: f64, gap: f64) {
        self.samples += 1;
        self.worst = self.worst.max(violation);
        if gap.is_finite() {
            self.gap = self.gap.max(gap);
        } else {
            self.gap = f64::INFINITY;
        }
    }

    fn finish(self, tol: f64) -> AxiomCheck {
        AxiomCheck {
            label: self.label,
            samples: self.samples,
            worst_violation: self.worst,
            worst_gap: self.gap,
            verdict: Verdict::from_bool(self.worst <= tol),
        }
    }
}

/// Check the direct-sum rule, the bimodule rule and the level-1 norm
/// axioms on `samples` random elements per level (levels `≤ max_level`).
pub fn check_axioms(
    space: &OperatorSpace,
    max_level: usize,
    samples: usize,
    cfg: &OptimizerConfig,
    tol: f64,
) -> Result<AxiomReport> {
    let m = space.dim();
    let mut rng = rng_for(cfg.seed, 0xA810);
    let mut sum_rule = Tally::new("direct sum equals max");
    let mut bimodule = Tally::new("bimodule contraction");
    let mut homog = Tally::new("level-1 homogeneity");
    let mut triangle = Tally::new("level-1 triangle inequality");
    let mut call = 0u64;
    let mut norm = |x: &ElementMatrix| {
        call += 1;
        space.norm(x, &cfg.derived(call))
    };

    for _ in 0..samples {
        // direct sums with total level ≤ max_level
        for (a, b) in (1..max_level).flat_map(|a| (1..=max_level - a).map(move |b| (a, b))) {
            let x = random_element(&mut rng, a, m);
            let y = random_element(&mut rng, b, m);
            let (ex, ey, es) = (norm(&x)?, norm(&y)?, norm(&x.direct_sum(&y)?)?);
            let v = (ex.lower.max(ey.lower) - es.upper).max(es.lower - ex.upper.max(ey.upper));
            sum_rule.record(v.max(0.0), es.gap().max(ex.gap()).max(ey.gap()));
        }
        // α x β between levels
        for n in 1..=max_level {
            let target = rng.random_range(1..=max_level);
            let x = random_element(&mut rng, n, m);
            let alpha = gaussian_matrix(&mut rng, target, n);
            let beta = gaussian_matrix(&mut rng, n, target);
            let (ex, ey) = (norm(&x)?, norm(&x.sandwich(&alpha, &beta)?)?);
            let bound = operator_norm(&alpha) * ex.upper * operator_norm(&beta);
            bimodule.record((ey.lower - bound).max(0.0), ey.gap().max(ex.gap()));
        }
        // level-1 Banach norm
        let x = random_element(&mut rng, 1, m);
        let y = random_element(&mut rng, 1, m);
        let lam = gaussian(&mut rng);
        let (ex, ey) = (norm(&x)?, norm(&y)?);
        let el = norm(&x.scale(lam))?;
        let h = (el.lower - lam.norm() * ex.upper).max(lam.norm() * ex.lower - el.upper);
        homog.record(h.max(0.0), el.gap().max(ex.gap()));
        let es = norm(&x.add(&y)?)?;
        triangle.record((es.lower - ex.upper - ey.upper).max(0.0), es.gap());
    }

    let checks: Vec<AxiomCheck> = [sum_rule, bimodule, homog, triangle]
        .into_iter()
        .filter(|t| t.samples > 0)
        .map(|t| t.finish(tol))
        .collect();
    let verdict = Verdict::all(checks.iter().map(|c| c.verdict));
    Ok(AxiomReport {
        space: space.to_string(),
        max_level,
        checks,
        verdict,
    })
}

/// The spaces swept by default: matrices, trace class, column Hilbert space,
/// both quantizations of the `2 × 2` operator norm, mixed direct sums and two
/// quotients (by the scalars in `M_2`, and a diagonal by a coordinate).
pub fn standard_spaces() -> Vec<(String, OperatorSpace)> {
    use crate::opspace::space::*;
    let op2 = BanachNorm::Operator { rows: 2, cols: 2 };
    let id = CMatrix::identity(2);
    let diag = concrete(2, 2, vec![CMatrix::unit(2, 2, 0, 0), CMatrix::unit(2, 2, 1, 1)]).expect("independent");
    vec![
        ("matrix space M_2".into(), matrix_space(2)),
        ("trace class T_2".into(), trace_class(2)),
        ("column Hilbert space of dimension 3".into(), column_hilbert(3)),
        ("minimal quantization of the M_2 norm".into(), min_quant(op2.clone()).expect("valid")),
        ("maximal quantization of the M_2 norm".into(), max_quant(op2).expect("valid")),
        ("l1 sum of M_1 and M_2".into(), direct_sum_1(vec![matrix_space(1), matrix_space(2)])),
        ("l-infinity sum of T_2 and M_1".into(), direct_sum_inf(vec![trace_class(2), matrix_space(1)])),
        ("M_2 modulo the scalars".into(), quotient_by_matrices(matrix_space(2), &[id]).expect("valid")),
        ("diagonal 2x2 modulo the first coordinate".into(), quotient_space(diag, &[vec![ONE, ZERO]]).expect("valid")),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opspace::space::*;

    #[test]
    fn matrix_space_satisfies_axioms() {
        let r = check_axioms(&matrix_space(2), 3, 5, &OptimizerConfig::with_seed(1).restarts(1), 1e-9).unwrap();
        assert_eq!(r.verdict, Verdict::Holds, "{r:?}");
        assert!(r.checks.iter().all(|c| c.worst_gap == 0.0));
    }
}
