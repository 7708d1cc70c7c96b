//! Linear maps between operator spaces, their amplifications and
//! completely bounded norms.
//!
//! Lower bounds on `‖u_n‖` are attained: a point `x` of the unit ball of
//! `M_n(X)` and a complete contraction `φ` on the codomain with
//! `‖φ_n(u_n(x))‖` equal to the reported value. Upper bounds come from
//! explicit Wittstock factorizations of an extension of `u` to the ambient
//! matrix spaces, available when both spaces are concrete.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numerics::factor::cb_upper;
use crate::numerics::linalg::{inverse, null_space, operator_norm, range_basis};
use crate::numerics::optimize::{maximize, MatrixNormObjective};
use crate::numerics::random::rng_for;
use crate::numerics::{CMatrix, NormEstimate, OptimizerConfig, C64, ONE};
use crate::opspace::{matrix_space, quotient_space, random_element, subspace, ElementMatrix, OperatorSpace};
use crate::verdict::Verdict;

/// `u: X → Y` acting on coordinates by `coeffs` (`dim Y × dim X`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CbMapRepr")]
pub struct CbMap {
    pub domain: OperatorSpace,
    pub codomain: OperatorSpace,
    pub coeffs: CMatrix,
}

#[derive(Deserialize)]
struct CbMapRepr {
    domain: OperatorSpace,
    codomain: OperatorSpace,
    coeffs: CMatrix,
}

impl TryFrom<CbMapRepr> for CbMap {
    type Error = Error;

    fn try_from(r: CbMapRepr) -> Result<Self> {
        CbMap::new(r.domain, r.codomain, r.coeffs)
    }
}

impl CbMap {
    pub fn new(domain: OperatorSpace, codomain: OperatorSpace, coeffs: CMatrix) -> Result<Self> {
        if coeffs.shape() != (codomain.dim(), domain.dim()) {
            return Err(Error::Dimension(format!(
                "coefficients are {}x{}, map needs {}x{}",
                coeffs.rows(),
                coeffs.cols(),
                codomain.dim(),
                domain.dim()
            )));
        }
        if !coeffs.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            domain,
            codomain,
            coeffs,
        })
    }

    pub fn identity(space: OperatorSpace) -> Self {
        let m = space.dim();
        Self {
            domain: space.clone(),
            codomain: space,
            coeffs: CMatrix::identity(m),
        }
    }

    pub fn zero(domain: OperatorSpace, codomain: OperatorSpace) -> Self {
        let coeffs = CMatrix::zeros(codomain.dim(), domain.dim());
        Self {
            domain,
            codomain,
            coeffs,
        }
    }

    /// `λ · u`.
    pub fn scaled(&self, s: C64) -> Self {
        Self {
            coeffs: self.coeffs.scale(s),
            ..self.clone()
        }
    }

    /// `u_n(x)`: `u` applied to every entry.
    pub fn amplify(&self, x: &ElementMatrix) -> Result<ElementMatrix> {
        if x.dim() != self.domain.dim() {
            return Err(Error::Dimension(format!(
                "element has {} coordinates, domain has dimension {}",
                x.dim(),
                self.domain.dim()
            )));
        }
        x.map_coords(&self.coeffs)
    }

    /// `self ∘ v`.
    pub fn compose(&self, v: &CbMap) -> Result<CbMap> {
        if v.codomain != self.domain {
            return Err(Error::Dimension("inner codomain differs from outer domain".into()));
        }
        Ok(CbMap {
            domain: v.domain.clone(),
            codomain: self.codomain.clone(),
            coeffs: &self.coeffs * &v.coeffs,
        })
    }

    /// Matrix of an extension to the ambient spaces, sending row-major
    /// `vec(b)` to row-major `vec(u(b))`, with the ambient shapes.
    fn ambient_matrix(&self) -> Option<(CMatrix, (usize, usize), (usize, usize))> {
        let (OperatorSpace::Concrete { rows: ri, cols: ci, .. }, OperatorSpace::Concrete { rows: ro, cols: co, .. }) =
            (&self.domain, &self.codomain)
        else {
            return None;
        };
        let bd = self.domain.basis_matrix()?;
        let bc = self.codomain.basis_matrix()?;
        let gram = &bd.adjoint() * &bd;
        let bplus = &inverse(&gram).ok()? * &bd.adjoint();
        Some((&(&bc * &self.coeffs) * &bplus, (*ro, *co), (*ri, *ci)))
    }

    /// Certified upper bound on `‖u‖_cb` (`+∞` when no factorization is
    /// available).
    pub fn cb_upper(&self) -> f64 {
        if self.coeffs.max_abs() == 0.0 || self.domain.dim() == 0 {
            return 0.0;
        }
        if self.domain == self.codomain && self.coeffs.approx_eq(&CMatrix::identity(self.domain.dim()), 0.0) {
            return 1.0;
        }
        if let (
            OperatorSpace::Dual { base: a, pairing: p },
            OperatorSpace::Dual { base: b, pairing: q },
        ) = (&self.domain, &self.codomain)
        {
            // the dual map has the same cb norm: ⟨u f, b⟩ = ⟨f, v b⟩ gives
            // v = P⁻¹ uᵀ Q
            let Ok(pinv) = inverse(p) else { return f64::INFINITY };
            let v = CbMap {
                domain: (**b).clone(),
                codomain: (**a).clone(),
                coeffs: &(&pinv * &self.coeffs.transpose()) * q,
            };
            return v.cb_upper();
        }
        match self.ambient_matrix() {
            Some((l, out, inp)) => cb_upper(&l, out, inp).value,
            None => f64::INFINITY,
        }
    }
}

/// Transpose on `M_k`.
pub fn transpose_map(k: usize) -> CbMap {
    let mut t = CMatrix::zeros(k * k, k * k);
    for i in 0..k {
        for j in 0..k {
            t[(j * k + i, i * k + j)] = ONE;
        }
    }
    CbMap {
        domain: matrix_space(k),
        codomain: matrix_space(k),
        coeffs: t,
    }
}

/// Best value of `‖φ_n(u_n(x))‖` over the unit ball of `M_n(X)` and the
/// codomain test families, with the attaining `x`.
fn amplified_search(u: &CbMap, n: usize, cfg: &OptimizerConfig) -> Result<(f64, Option<ElementMatrix>, bool)> {
    let rep = u.domain.ball_rep(n);
    let fams = u.codomain.families(n)?;
    let mut best: (f64, Option<ElementMatrix>, bool) = (0.0, None, true);
    for (k, fam) in fams.iter().enumerate() {
        let kx = rep.ball.dim();
        let ball = rep.ball.clone().concat(fam.ball.clone());
        let coords = rep.coords.clone();
        let images = fam.images.clone();
        let coeffs = u.coeffs.clone();
        let f = MatrixNormObjective::new(move |t: &[C64]| {
            let x = coords(&t[..kx]);
            let y = x.map_coords(&coeffs).expect("dimensions checked");
            y.assemble(&images(&t[kx..]))
        });
        let opt = maximize(&f, &ball, &cfg.derived(k as u64), &[])?;
        let x = (rep.coords)(&opt.point[..kx]);
        // the parametrization stays in the ball; guard against retraction slack
        let gauge = u.domain.norm_upper(&x)?.max(1.0);
        let value = fam.value(&opt.point[kx..], &u.amplify(&x)?) / gauge;
        if value > best.0 || best.1.is_none() {
            best = (value, Some(x.scale(C64::new(1.0 / gauge, 0.0))), opt.converged);
        }
    }
    Ok(best)
}

/// `‖u_n‖` as an interval; the upper end is the cb upper bound.
pub fn amplified_norm(u: &CbMap, n: usize, cfg: &OptimizerConfig) -> Result<NormEstimate> {
    if n == 0 {
        return Err(Error::Invalid("level must be at least 1".into()));
    }
    cfg.validate()?;
    if u.domain.dim() == 0 || u.coeffs.max_abs() == 0.0 {
        return Ok(NormEstimate::zero());
    }
    let (lower, x, converged) = amplified_search(u, n, cfg)?;
    Ok(NormEstimate {
        lower,
        upper: u.cb_upper().max(lower),
        witness: json!({ "level": n, "element": x }),
        converged,
    })
}

/// Result of a cb-norm computation over levels `1..=max_level`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CbNormReport {
    pub estimate: NormEstimate,
    /// Level of the best witness.
    pub level: usize,
    /// Best lower bound per level.
    pub per_level: Vec<f64>,
    /// The codomain is `M_k` with `k ≤ max_level`, so `‖u‖_cb = ‖u_k‖`.
    pub exact: bool,
    pub reason: String,
}

pub fn cb_norm_lower(u: &CbMap, max_level: usize, cfg: &OptimizerConfig) -> Result<CbNormReport> {
    if max_level == 0 {
        return Err(Error::Invalid("max level must be at least 1".into()));
    }
    let mut per_level = Vec::with_capacity(max_level);
    let mut best = NormEstimate::zero();
    let mut level = 1;
    for n in 1..=max_level {
        let est = amplified_norm(u, n, &cfg.derived(n as u64))?;
        // padding keeps lower bounds monotone in the level
        let lower = est.lower.max(per_level.last().copied().unwrap_or(0.0));
        per_level.push(lower);
        if est.lower > best.lower || n == 1 {
            best = est;
            level = n;
        }
    }
    let cap = u.codomain.matrix_order().filter(|&k| k <= max_level);
    let exact = cap.is_some() || (best.upper - best.lower) <= 1e-9 * best.upper.max(1.0);
    let reason = match cap {
        Some(k) => format!("codomain is M_{k}: the cb norm is attained at level {k}"),
        None if exact => "lower bound meets the factorization upper bound".into(),
        None => "levels above the maximum were not examined".into(),
    };
    Ok(CbNormReport {
        estimate: best,
        level,
        per_level,
        exact,
        reason,
    })
}

/// Outcome of a contraction or isometry check.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MapCheck {
    pub verdict: Verdict,
    pub report: CbNormReport,
    pub witness: Value,
    pub reason: String,
}

/// Fails on a witness with `‖u_n(x)‖ > (1 + tol)‖x‖`; holds when a
/// factorization certifies `‖u‖_cb ≤ 1 + tol`; otherwise inconclusive.
pub fn is_complete_contraction(u: &CbMap, max_level: usize, cfg: &OptimizerConfig, tol: f64) -> Result<MapCheck> {
    let report = cb_norm_lower(u, max_level, cfg)?;
    let est = &report.estimate;
    let (verdict, reason) = if est.lower > 1.0 + tol {
        (Verdict::Fails, format!("witness at level {} has ratio {:.9}", report.level, est.lower))
    } else if est.upper <= 1.0 + tol {
        (Verdict::Holds, "factorization certifies cb norm at most one".to_string())
    } else {
        (Verdict::Inconclusive, "no witness above one and no certifying factorization".to_string())
    };
    Ok(MapCheck {
        verdict,
        witness: est.witness.clone(),
        report,
        reason,
    })
}

/// Compares `‖u_n(x)‖` with `‖x‖` on random and optimized elements.
/// Fails on a certified discrepancy; holds when the map is the identity or
/// every comparison was decided within `tol`; otherwise inconclusive.
pub fn is_complete_isometry(u: &CbMap, max_level: usize, cfg: &OptimizerConfig, tol: f64) -> Result<MapCheck> {
    let contraction = is_complete_contraction(u, max_level, cfg, tol)?;
    if contraction.verdict == Verdict::Fails {
        return Ok(MapCheck {
            reason: format!("norm increases: {}", contraction.reason),
            ..contraction
        });
    }
    if u.domain == u.codomain && u.coeffs.approx_eq(&CMatrix::identity(u.domain.dim()), 0.0) {
        return Ok(MapCheck {
            verdict: Verdict::Holds,
            reason: "identity map".into(),
            ..contraction
        });
    }
    let mut rng = rng_for(cfg.seed, 0x150);
    let mut undecided = false;
    for n in 1..=max_level {
        for s in 0..4u64 {
            let x = random_element(&mut rng, n, u.domain.dim());
            let c = cfg.derived(100 * n as u64 + s);
            let ex = u.domain.norm(&x, &c)?;
            let ey = u.codomain.norm(&u.amplify(&x)?, &c)?;
            if ey.upper < ex.lower - tol * ex.lower.max(1.0) || ey.lower > ex.upper + tol * ex.upper.max(1.0) {
                return Ok(MapCheck {
                    verdict: Verdict::Fails,
                    witness: json!({ "level": n, "element": x, "norm": ex, "imageNorm": ey }),
                    reason: format!("level {n} norm changes from about {:.6} to {:.6}", ex.value(), ey.value()),
                    report: contraction.report,
                });
            }
            if ex.gap() > tol * ex.upper.max(1.0) || ey.gap() > tol * ey.upper.max(1.0) {
                undecided = true;
            }
        }
    }
    let verdict = if undecided || contraction.verdict != Verdict::Holds {
        Verdict::Inconclusive
    } else {
        Verdict::Holds
    };
    let reason = if verdict == Verdict::Holds {
        "norms agree on every sampled element and the map is a complete contraction".into()
    } else {
        "no discrepancy found; some comparisons were not decided".into()
    };
    Ok(MapCheck {
        verdict,
        reason,
        ..contraction
    })
}

fn difference(f: &CbMap, g: &CbMap) -> Result<CMatrix> {
    if f.domain != g.domain || f.codomain != g.codomain {
        return Err(Error::Dimension("maps must share domain and codomain".into()));
    }
    let mut d = f.coeffs.clone();
    d.add_scaled(C64::new(-1.0, 0.0), &g.coeffs);
    Ok(d)
}

/// `{x : f(x) = g(x)}` with the norms inherited from the domain.
pub fn equalizer(f: &CbMap, g: &CbMap) -> Result<OperatorSpace> {
    let d = difference(f, g)?;
    let kernel = null_space(&d, 1e-10);
    subspace(f.domain.clone(), &kernel)
}

/// `Y / im(f − g)`.
pub fn coequalizer(f: &CbMap, g: &CbMap) -> Result<OperatorSpace> {
    let d = difference(f, g)?;
    let image = range_basis(&d, 1e-10);
    let vecs: Vec<Vec<C64>> = (0..image.cols()).map(|c| image.col(c)).collect();
    quotient_space(f.codomain.clone(), &vecs)
}

/// `‖a‖_op` of the assembled image, exposed for reports.
pub fn assembled_norm(space: &OperatorSpace, x: &ElementMatrix) -> Option<f64> {
    let OperatorSpace::Concrete { basis, .. } = space else { return None };
    Some(operator_norm(&x.assemble(basis)))
}
