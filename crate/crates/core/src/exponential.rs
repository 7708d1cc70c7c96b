//! Finitely supported elements of `ℓ¹(Ball X)`, promotion `x ↦ δ_x`, the
//! linearization of ball-to-ball functions and three nonlinear primitives
//! on matrices with their linearized forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hsduality::{Channel, Picture};
use crate::numerics::{kron, operator_norm, CMatrix, OptimizerConfig, C64, ONE, ZERO};
use crate::opspace::{ElementMatrix, OperatorSpace};

/// Slack allowed for points of the closed unit ball.
pub const BALL_TOL: f64 = 1e-9;
/// Slack allowed for images of ball functions.
pub const ESCAPE_TOL: f64 = 1e-6;

/// Level-1 norm of `v`: the certified upper bound when it already settles
/// the comparison with `1 + tol`, the optimized lower bound otherwise.
fn ball_norm(space: &OperatorSpace, v: &[C64], tol: f64) -> Result<f64> {
    let x = ElementMatrix::single(v);
    let upper = space.norm_upper(&x)?;
    if upper <= 1.0 + tol {
        return Ok(upper);
    }
    let est = space.norm(&x, &OptimizerConfig::default().restarts(4))?;
    Ok(if est.lower > 1.0 + tol { est.lower } else { est.lower.max(1.0) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    #[serde(with = "crate::numerics::json::cvec")]
    pub point: Vec<C64>,
    #[serde(with = "crate::numerics::json::cpair")]
    pub coeff: C64,
}

/// `Σ λ_i δ_{x_i}` with pairwise distinct points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FreeL1Repr")]
pub struct FreeL1Element {
    pub space: OperatorSpace,
    pub support: Vec<SupportPoint>,
}

#[derive(Deserialize)]
struct FreeL1Repr {
    space: OperatorSpace,
    support: Vec<SupportPoint>,
}

impl TryFrom<FreeL1Repr> for FreeL1Element {
    type Error = Error;

    fn try_from(r: FreeL1Repr) -> Result<Self> {
        let mut e = FreeL1Element::zero(r.space);
        for p in r.support {
            e = e.add(&FreeL1Element::promote(&e.space, &p.point)?.scale(p.coeff))?;
        }
        Ok(e)
    }
}

impl FreeL1Element {
    pub fn zero(space: OperatorSpace) -> Self {
        Self { space, support: vec![] }
    }

    /// `δ_x`; fails outside the closed unit ball.
    pub fn promote(space: &OperatorSpace, x: &[C64]) -> Result<Self> {
        if x.len() != space.dim() {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, space has dimension {}",
                x.len(),
                space.dim()
            )));
        }
        if x.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = ball_norm(space, x, BALL_TOL)?;
        if norm > 1.0 + BALL_TOL {
            return Err(Error::OutsideUnitBall { norm });
        }
        Ok(Self {
            space: space.clone(),
            support: vec![SupportPoint {
                point: x.to_vec(),
                coeff: ONE,
            }],
        })
    }

    /// `Σ |λ_i|`.
    pub fn norm(&self) -> f64 {
        self.support.iter().map(|p| p.coeff.norm()).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        let support = self
            .support
            .iter()
            .filter(|_| s != ZERO)
            .map(|p| SupportPoint {
                point: p.point.clone(),
                coeff: p.coeff * s,
            })
            .collect();
        Self {
            space: self.space.clone(),
            support,
        }
    }

    /// Sum; points are merged only when their coordinates are identical.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::Dimension("elements live over different spaces".into()));
        }
        let mut support = self.support.clone();
        for p in &other.support {
            match support.iter_mut().find(|q| q.point == p.point) {
                Some(q) => q.coeff += p.coeff,
                None => support.push(p.clone()),
            }
        }
        support.retain(|p| p.coeff != ZERO);
        Ok(Self {
            space: self.space.clone(),
            support,
        })
    }
}

type PointFn<'a, T> = Box<dyn Fn(&[C64]) -> T + 'a>;

/// A function from `Ball X` to `Ball Y`, on coordinates.
pub struct BallFunction<'a> {
    pub domain: OperatorSpace,
    pub codomain: OperatorSpace,
    f: PointFn<'a, Vec<C64>>,
}

impl<'a> BallFunction<'a> {
    pub fn new(domain: OperatorSpace, codomain: OperatorSpace, f: impl Fn(&[C64]) -> Vec<C64> + 'a) -> Self {
        Self {
            domain,
            codomain,
            f: Box::new(f),
        }
    }

    pub fn eval(&self, x: &[C64]) -> Vec<C64> {
        (self.f)(x)
    }

    /// `Σ λ_i δ_{x_i} ↦ Σ λ_i g(x_i)`, checking that every image stays in
    /// the unit ball.
    pub fn linearize(&self, e: &FreeL1Element) -> Result<Vec<C64>> {
        if e.space != self.domain {
            return Err(Error::Dimension("element lives over another space".into()));
        }
        let mut out = vec![ZERO; self.codomain.dim()];
        for (index, p) in e.support.iter().enumerate() {
            let y = self.eval(&p.point);
            if y.len() != out.len() {
                return Err(Error::Dimension("ball function output has the wrong length".into()));
            }
            let norm = ball_norm(&self.codomain, &y, ESCAPE_TOL)?;
            if norm > 1.0 + ESCAPE_TOL {
                return Err(Error::BallEscape { index, norm });
            }
            for (o, v) in out.iter_mut().zip(y) {
                *o += p.coeff * v;
            }
        }
        Ok(out)
    }
}

fn as_matrix(rows: usize, cols: usize, v: &[C64]) -> CMatrix {
    CMatrix::from_vec(rows, cols, v.to_vec()).expect("shape")
}

/// `f ↦ f†`.
pub fn u_adjoint(f: &CMatrix) -> CMatrix {
    f.adjoint()
}

/// `f ↦ |0⟩⟨0| ⊗ 1 + |1⟩⟨1| ⊗ f` on `ℂ² ⊗ H`.
pub fn u_ctrl(f: &CMatrix) -> Result<CMatrix> {
    if f.rows() != f.cols() {
        return Err(Error::Dimension("controlled operation needs a square matrix".into()));
    }
    let d = f.rows();
    let p0 = CMatrix::unit(2, 2, 0, 0);
    let p1 = CMatrix::unit(2, 2, 1, 1);
    Ok(&kron(&p0, &CMatrix::identity(d)) + &kron(&p1, f))
}

/// `f ↦ (x ↦ f x f†)` as a Schrödinger-picture channel.
pub fn u_apply(f: &CMatrix) -> Channel {
    Channel::new(f.cols(), f.rows(), Picture::Schrodinger, kron(&f.conj(), f)).expect("shape")
}

/// Linearized `u_adjoint` on `S(B(H₁, H₂))` (`f` is `d2 × d1`).
pub fn adjoint_l(e: &FreeL1Element, d2: usize, d1: usize) -> Result<CMatrix> {
    let g = BallFunction::new(
        e.space.clone(),
        crate::opspace::rect_matrix_space(d1, d2),
        |x| u_adjoint(&as_matrix(d2, d1, x)).data().to_vec(),
    );
    Ok(as_matrix(d1, d2, &g.linearize(e)?))
}

/// Linearized `u_ctrl` on `S(B(H))`.
pub fn ctrl_l(e: &FreeL1Element, d: usize) -> Result<CMatrix> {
    let g = BallFunction::new(e.space.clone(), crate::opspace::matrix_space(2 * d), |x| {
        u_ctrl(&as_matrix(d, d, x)).expect("square").data().to_vec()
    });
    Ok(as_matrix(2 * d, 2 * d, &g.linearize(e)?))
}

/// Linearized `u_apply`: `Σ λ_i (x ↦ f_i x f_i†)`, with every summand
/// checked to be completely contractive on trace classes.
pub fn apply_l(e: &FreeL1Element, d2: usize, d1: usize) -> Result<Channel> {
    if e.space.dim() != d1 * d2 {
        return Err(Error::Dimension("element does not live over B(H1, H2)".into()));
    }
    let mut s = CMatrix::zeros(d2 * d2, d1 * d1);
    for (index, p) in e.support.iter().enumerate() {
        let ch = u_apply(&as_matrix(d2, d1, &p.point));
        let cb = apply_cb_bound(&ch);
        if cb > 1.0 + ESCAPE_TOL {
            return Err(Error::BallEscape { index, norm: cb });
        }
        s.add_scaled(p.coeff, &ch.superop);
    }
    Channel::new(d1, d2, Picture::Schrodinger, s)
}

/// Certified cb bound of a Schrödinger-picture map on trace classes.
pub fn apply_cb_bound(ch: &Channel) -> f64 {
    ch.to_cbmap().cb_upper()
}

/// Norms around a `u_ctrl` image: `(‖u_ctrl(f) k‖², ‖h₀‖² + ‖f h₁‖²)` for
/// `k = |0⟩ ⊗ h₀ + |1⟩ ⊗ h₁`.
pub fn ctrl_norm_identity(f: &CMatrix, k: &[C64]) -> Result<(f64, f64)> {
    let d = f.rows();
    if k.len() != 2 * d {
        return Err(Error::Dimension("vector must live in C^2 ⊗ H".into()));
    }
    let out = u_ctrl(f)?.mul_vec(k);
    let lhs: f64 = out.iter().map(|z| z.norm_sqr()).sum();
    let h0: f64 = k[..d].iter().map(|z| z.norm_sqr()).sum();
    let fh1: f64 = f.mul_vec(&k[d..]).iter().map(|z| z.norm_sqr()).sum();
    Ok((lhs, h0 + fh1))
}

/// Largest amount by which the three primitives push the contraction `f`
/// out of the target unit balls (0 when all stay inside).
pub fn ball_preservation_defect(f: &CMatrix) -> f64 {
    let adj = operator_norm(&u_adjoint(f)) - 1.0;
    let ctrl = if f.rows() == f.cols() {
        operator_norm(&u_ctrl(f).expect("square")) - 1.0
    } else {
        f64::NEG_INFINITY
    };
    let app = apply_cb_bound(&u_apply(f)) - 1.0;
    adj.max(ctrl).max(app).max(0.0)
}
