//! Norm oracles.
//!
//! Lower bounds come from families of completely contractive maps
//! `φ_θ: X → M_{r,c}` (`x ↦ Σ_c x_c E_c(θ)`), since `‖φ_n(x)‖ ≤ ‖x‖_n` for
//! every member. Upper bounds come from explicit decompositions of the
//! element. Both sides are certified; the optimizer only decides how tight
//! the interval is.

use std::sync::Arc;

use serde_json::{json, Value};

use super::element::ElementMatrix;
use super::space::{BanachNorm, OperatorSpace};
use crate::error::{Error, Result};
use crate::numerics::factor::cb_upper_until;
use crate::numerics::json::vec_to_json;
use crate::numerics::linalg::{inverse, operator_norm, singular_values};
use crate::numerics::optimize::{maximize, BlockBall, MatrixNormObjective, OptimumPoint, ProductBall};
use crate::numerics::{kron, CMatrix, NormEstimate, OptimizerConfig, C64, ONE, ZERO};

pub type ImageFn = Arc<dyn Fn(&[C64]) -> Vec<CMatrix> + Send + Sync>;
pub type CoordFn = Arc<dyn Fn(&[C64]) -> ElementMatrix + Send + Sync>;

/// Completely contractive maps `x ↦ Σ_c x_c E_c(θ)` for `θ` in `ball`.
#[derive(Clone)]
pub struct CcFamily {
    pub ball: ProductBall,
    pub images: ImageFn,
    pub warm: Vec<Vec<C64>>,
    pub label: String,
}

impl std::fmt::Debug for CcFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CcFamily({}, {} params)", self.label, self.ball.dim())
    }
}

impl CcFamily {
    pub fn new(ball: ProductBall, images: ImageFn, label: impl Into<String>) -> Self {
        Self {
            ball,
            images,
            warm: Vec::new(),
            label: label.into(),
        }
    }

    /// A single map with fixed images.
    pub fn fixed(images: Vec<CMatrix>, label: impl Into<String>) -> Self {
        let images = Arc::new(images);
        Self::new(ProductBall::default(), Arc::new(move |_| (*images).clone()), label)
    }

    pub fn images_at(&self, theta: &[C64]) -> Vec<CMatrix> {
        (self.images)(theta)
    }

    pub fn value(&self, theta: &[C64], x: &ElementMatrix) -> f64 {
        operator_norm(&x.assemble(&self.images_at(theta)))
    }

    /// Best member found for `x`.
    pub fn sup(&self, x: &ElementMatrix, cfg: &OptimizerConfig) -> Result<OptimumPoint> {
        if self.ball.dim() == 0 {
            return Ok(OptimumPoint {
                value: self.value(&[], x),
                point: vec![],
                restart: 0,
                converged: true,
            });
        }
        let images = self.images.clone();
        let f = MatrixNormObjective::new(move |t: &[C64]| x.assemble(&images(t)));
        maximize(&f, &self.ball, cfg, &self.warm)
    }

    /// Precompose with a linear coordinate map: `E'_c = Σ_a m[a,c] E_a`.
    pub fn pullback(self, m: &CMatrix, label: &str) -> Self {
        let m = m.clone();
        let inner = self.images;
        CcFamily {
            ball: self.ball,
            images: Arc::new(move |t| combine(&inner(t), &m)),
            warm: self.warm,
            label: format!("{label}({})", self.label),
        }
    }

    /// Extend to a direct sum: coordinates outside `offset..offset+len` map to 0.
    pub fn embedded(self, offset: usize, total: usize, label: &str) -> Self {
        let inner = self.images;
        CcFamily {
            ball: self.ball,
            images: Arc::new(move |t| {
                let e = inner(t);
                let (r, c) = e.first().map_or((0, 0), |m| m.shape());
                let mut out = vec![CMatrix::zeros(r, c); total];
                for (k, m) in e.into_iter().enumerate() {
                    out[offset + k] = m;
                }
                out
            }),
            warm: self.warm,
            label: format!("{label}({})", self.label),
        }
    }

    /// Compress into `M_size`: `V E_c W` with contractions `V`, `W`.
    pub fn compressed(self, size: usize, shape: (usize, usize)) -> Self {
        let (r, c) = shape;
        let inner = self.images;
        let k = self.ball.dim();
        let ball = self
            .ball
            .concat(ProductBall::new(vec![BlockBall::op(size, r), BlockBall::op(c, size)]));
        CcFamily {
            ball,
            images: Arc::new(move |t| {
                let v = CMatrix::from_vec(size, r, t[k..k + size * r].to_vec()).expect("shape");
                let w = CMatrix::from_vec(c, size, t[k + size * r..].to_vec()).expect("shape");
                inner(&t[..k]).iter().map(|e| &(&v * e) * &w).collect()
            }),
            warm: vec![],
            label: format!("compress({})", self.label),
        }
    }
}

/// `E'_c = Σ_a m[a,c] E_a`.
pub fn combine(images: &[CMatrix], m: &CMatrix) -> Vec<CMatrix> {
    let (r, c) = images.first().map_or((0, 0), |e| e.shape());
    (0..m.cols())
        .map(|col| {
            let mut acc = CMatrix::zeros(r, c);
            for (a, e) in images.iter().enumerate() {
                if m[(a, col)] != ZERO {
                    acc.add_scaled(m[(a, col)], e);
                }
            }
            acc
        })
        .collect()
}

/// A parametrization `θ ↦ x(θ)` of (a dense part of) the unit ball of
/// `M_n(X)` by a product ball; `x(θ)` always lies in the closed unit ball.
#[derive(Clone)]
pub struct BallRep {
    pub ball: ProductBall,
    pub coords: CoordFn,
    pub warm: Vec<Vec<C64>>,
    /// `true` when the parametrization covers the whole ball.
    pub complete: bool,
}

/// Positions of a basis made of distinct matrix units filling a product
/// pattern `R × C`.
#[derive(Clone, Debug)]
struct RectPattern {
    rows: usize,
    cols: usize,
    pos: Vec<(usize, usize)>,
}

fn rect_pattern(basis: &[CMatrix]) -> Option<RectPattern> {
    let mut cells = Vec::with_capacity(basis.len());
    for b in basis {
        let nz: Vec<usize> = (0..b.data().len()).filter(|&t| b.data()[t] != ZERO).collect();
        if nz.len() != 1 || b.data()[nz[0]] != ONE {
            return None;
        }
        cells.push((nz[0] / b.cols(), nz[0] % b.cols()));
    }
    let mut rs: Vec<usize> = cells.iter().map(|c| c.0).collect();
    let mut cs: Vec<usize> = cells.iter().map(|c| c.1).collect();
    rs.sort_unstable();
    rs.dedup();
    cs.sort_unstable();
    cs.dedup();
    let mut uniq = cells.clone();
    uniq.sort_unstable();
    uniq.dedup();
    if uniq.len() != cells.len() || rs.len() * cs.len() != cells.len() {
        return None;
    }
    let pos = cells
        .iter()
        .map(|(r, c)| (rs.binary_search(r).unwrap(), cs.binary_search(c).unwrap()))
        .collect();
    Some(RectPattern {
        rows: rs.len(),
        cols: cs.len(),
        pos,
    })
}

impl OperatorSpace {
    pub(crate) fn check_element(&self, x: &ElementMatrix) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "element has {} coordinates per entry, space has dimension {}",
                x.dim(),
                self.dim()
            )));
        }
        if x.level() == 0 {
            return Err(Error::Invalid("level must be at least 1".into()));
        }
        Ok(())
    }

    /// Interval estimate of `‖x‖_n`.
    pub fn norm(&self, x: &ElementMatrix, cfg: &OptimizerConfig) -> Result<NormEstimate> {
        self.check_element(x)?;
        cfg.validate()?;
        if self.dim() == 0 || x.is_zero() {
            return Ok(NormEstimate::zero());
        }
        match self {
            OperatorSpace::Concrete { basis, .. } => {
                let v = operator_norm(&x.assemble(basis));
                Ok(NormEstimate::exact(v, json!({ "method": "assembled operator norm" })))
            }
            OperatorSpace::Subspace { ambient, embedding } => ambient.norm(&x.map_coords(embedding)?, cfg),
            OperatorSpace::SumInf { parts } => {
                let offs = OperatorSpace::part_offsets(parts);
                let mut best = NormEstimate::zero();
                let mut upper: f64 = 0.0;
                let mut all_conv = true;
                for (k, p) in parts.iter().enumerate() {
                    let est = p.norm(&restrict(x, offs[k], offs[k + 1]), &cfg.derived(k as u64))?;
                    upper = upper.max(est.upper);
                    all_conv &= est.converged;
                    if est.lower > best.lower || k == 0 {
                        best = NormEstimate {
                            witness: json!({ "part": k, "inner": est.witness }),
                            ..est
                        };
                    }
                }
                best.upper = upper;
                best.converged = all_conv;
                Ok(best)
            }
            OperatorSpace::Dual { base, pairing } if matches!(&**base, OperatorSpace::Dual { .. }) => {
                // (X*)* = X: g ↦ a = P⁻¹ Qᵀ g
                let OperatorSpace::Dual { base: inner, pairing: p } = &**base else { unreachable!() };
                let m = &inverse(p)? * &pairing.transpose();
                inner.norm(&x.map_coords(&m)?, cfg)
            }
            OperatorSpace::Quotient { .. } => super::quotient::quotient_norm(self, x, cfg),
            // both quantizations agree with the base norm at level 1
            OperatorSpace::Min { norm } | OperatorSpace::Max { norm } if x.level() == 1 && norm.is_exact() => {
                Ok(NormEstimate::exact(norm.norm(x.coords()), json!({ "method": "base norm" })))
            }
            _ => {
                let lower = self.lower_bound(x, cfg)?;
                let upper = self.norm_upper_until(x, lower.0 * (1.0 + cfg.value_tolerance))?;
                Ok(NormEstimate {
                    lower: lower.0.max(0.0),
                    upper: upper.max(lower.0.min(upper)),
                    witness: lower.1,
                    converged: lower.2,
                })
            }
        }
    }

    /// Best value over the test families, with its witness.
    pub fn lower_bound(&self, x: &ElementMatrix, cfg: &OptimizerConfig) -> Result<(f64, Value, bool)> {
        let fams = self.families(x.level())?;
        let mut best: (f64, Value, bool) = (0.0, Value::Null, true);
        for (k, fam) in fams.iter().enumerate() {
            let opt = fam.sup(x, &cfg.derived(k as u64))?;
            if opt.value > best.0 || best.1.is_null() {
                best = (
                    opt.value,
                    json!({
                        "family": k,
                        "label": fam.label,
                        "point": vec_to_json(&opt.point),
                        "restart": opt.restart,
                    }),
                    opt.converged,
                );
            }
        }
        Ok(best)
    }

    /// Re-evaluate a lower-bound witness produced by [`lower_bound`](Self::lower_bound).
    pub fn evaluate_witness(&self, x: &ElementMatrix, witness: &Value) -> Result<f64> {
        if let Some(part) = witness.get("part").and_then(Value::as_u64) {
            let OperatorSpace::SumInf { parts } = self else {
                return Err(Error::Invalid("witness does not match the space".into()));
            };
            let offs = OperatorSpace::part_offsets(parts);
            let k = part as usize;
            return parts[k].evaluate_witness(&restrict(x, offs[k], offs[k + 1]), &witness["inner"]);
        }
        if let OperatorSpace::Subspace { ambient, embedding } = self {
            return ambient.evaluate_witness(&x.map_coords(embedding)?, witness);
        }
        if let OperatorSpace::Concrete { basis, .. } = self {
            return Ok(operator_norm(&x.assemble(basis)));
        }
        let fam_idx = witness
            .get("family")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Invalid("witness has no family index".into()))? as usize;
        let point = crate::numerics::json::vec_from_json(&witness["point"])
            .ok_or_else(|| Error::Invalid("witness point is malformed".into()))?;
        let fams = self.families(x.level())?;
        let fam = fams
            .get(fam_idx)
            .ok_or_else(|| Error::Invalid("witness family out of range".into()))?;
        if point.len() != fam.ball.dim() || fam.ball.norm(&point) > 1.0 + 1e-9 {
            return Err(Error::Invalid("witness point outside the parameter ball".into()));
        }
        Ok(fam.value(&point, x))
    }

    /// Certified upper bound from explicit decompositions (no optimizer
    /// randomness; may be `+∞`).
    pub fn norm_upper(&self, x: &ElementMatrix) -> Result<f64> {
        self.norm_upper_until(x, 0.0)
    }

    /// [`norm_upper`](Self::norm_upper) where the iterative certificates
    /// may stop once they reach `stop_at` (typically a known lower bound).
    pub fn norm_upper_until(&self, x: &ElementMatrix, stop_at: f64) -> Result<f64> {
        self.check_element(x)?;
        if self.dim() == 0 || x.is_zero() {
            return Ok(0.0);
        }
        Ok(match self {
            OperatorSpace::Concrete { basis, .. } => operator_norm(&x.assemble(basis)),
            OperatorSpace::Subspace { ambient, embedding } => ambient.norm_upper_until(&x.map_coords(embedding)?, stop_at)?,
            OperatorSpace::SumInf { parts } => {
                let offs = OperatorSpace::part_offsets(parts);
                let mut u: f64 = 0.0;
                for (k, p) in parts.iter().enumerate() {
                    u = u.max(p.norm_upper_until(&restrict(x, offs[k], offs[k + 1]), stop_at)?);
                }
                u
            }
            OperatorSpace::Sum1 { parts } => {
                let offs = OperatorSpace::part_offsets(parts);
                let mut u = 0.0;
                for (k, p) in parts.iter().enumerate() {
                    u += p.norm_upper(&restrict(x, offs[k], offs[k + 1]))?;
                }
                u
            }
            OperatorSpace::Dual { base, pairing } => dual_upper(base, pairing, x, stop_at)?,
            OperatorSpace::Min { norm } => {
                let frob = frobenius_bound(norm, x);
                let real = norm.realization().norm_upper(x)?;
                frob.min(real)
            }
            OperatorSpace::Max { norm } => max_upper(norm, x),
            OperatorSpace::Quotient { .. } => super::quotient::quotient_upper(self, x, stop_at)?.0,
            OperatorSpace::ProjTensor { left, right } => super::tensor_norm::projective_upper(left, right, x)?.value,
        })
    }

    /// Cheap certified upper bound of a level-1 vector.
    pub fn level1_upper(&self, v: &[C64]) -> f64 {
        self.norm_upper(&ElementMatrix::single(v)).unwrap_or(f64::INFINITY)
    }

    /// Test families for level-`n` elements.
    pub fn families(&self, n: usize) -> Result<Vec<CcFamily>> {
        Ok(match self {
            OperatorSpace::Concrete { basis, .. } => vec![CcFamily::fixed(basis.clone(), "identity")],
            OperatorSpace::Subspace { ambient, embedding } => ambient
                .families(n)?
                .into_iter()
                .map(|f| f.pullback(embedding, "restrict"))
                .collect(),
            OperatorSpace::SumInf { parts } => {
                let offs = OperatorSpace::part_offsets(parts);
                let total = self.dim();
                let mut out = Vec::new();
                for (k, p) in parts.iter().enumerate() {
                    for f in p.families(n)? {
                        out.push(f.embedded(offs[k], total, &format!("part{k}")));
                    }
                }
                out
            }
            OperatorSpace::Sum1 { parts } => {
                let offs = OperatorSpace::part_offsets(parts);
                let total = self.dim();
                let mut out = Vec::new();
                for (k, p) in parts.iter().enumerate() {
                    for f in p.families(n)? {
                        out.push(f.embedded(offs[k], total, &format!("project{k}")));
                    }
                }
                if let Some(f) = self.square_family(n) {
                    out.push(f);
                }
                out
            }
            OperatorSpace::Dual { .. } => vec![self.square_family(n).expect("dual family")],
            OperatorSpace::Min { norm } => vec![functional_family(norm)],
            OperatorSpace::Max { norm } => {
                // MAX is the largest structure, so every isometric
                // realization of the base norm bounds it from below
                let real = norm.realization();
                let mut out: Vec<CcFamily> = real
                    .families(n)?
                    .into_iter()
                    .map(|f| CcFamily {
                        label: format!("realization({})", f.label),
                        ..f
                    })
                    .collect();
                if let OperatorSpace::Concrete { basis, .. } = &real {
                    let flipped: Vec<CMatrix> = basis.iter().map(CMatrix::transpose).collect();
                    out.push(CcFamily::fixed(flipped, "transposed realization"));
                }
                out
            }
            OperatorSpace::Quotient { .. } => vec![],
            OperatorSpace::ProjTensor { left, right } => super::tensor_norm::projective_families(left, right, n)?,
        })
    }

    /// A family of completely contractive maps into `M_size`, rich enough
    /// to realize every such map for the kinds where that is known.
    pub fn square_family(&self, size: usize) -> Option<CcFamily> {
        match self {
            OperatorSpace::Concrete { rows, cols, basis } => Some(concrete_square_family(*rows, *cols, basis, size)),
            OperatorSpace::Subspace { ambient, embedding } => {
                Some(ambient.square_family(size)?.pullback(embedding, "restrict"))
            }
            OperatorSpace::Dual { base, pairing } => {
                let rep = base.ball_rep(size);
                let p = pairing.clone();
                let m = self.dim();
                let coords = rep.coords.clone();
                let images: ImageFn = Arc::new(move |t| {
                    let a = coords(t);
                    // E_c[p,q] = Σ_s P[c,s] a_pq[s]
                    (0..m)
                        .map(|c| {
                            CMatrix::from_fn(size, size, |pp, qq| {
                                let e = a.entry(pp, qq);
                                (0..m).map(|s| p[(c, s)] * e[s]).sum()
                            })
                        })
                        .collect()
                });
                let mut fam = CcFamily::new(rep.ball, images, "pairing");
                fam.warm = rep.warm;
                Some(fam)
            }
            OperatorSpace::Min { norm } => {
                let f = functional_family(norm);
                let k = f.ball.dim();
                let inner = f.images.clone();
                let ball = f.ball.concat(ProductBall::single(BlockBall::op(size, size)));
                Some(CcFamily::new(
                    ball,
                    Arc::new(move |t| {
                        let a = CMatrix::from_vec(size, size, t[k..].to_vec()).expect("shape");
                        inner(&t[..k]).iter().map(|e| a.scale(e[(0, 0)])).collect()
                    }),
                    "functional x matrix",
                ))
            }
            OperatorSpace::Max { norm } => norm.realization().square_family(size),
            OperatorSpace::Sum1 { parts } => {
                let fams: Vec<CcFamily> = parts.iter().map(|p| p.square_family(size)).collect::<Option<_>>()?;
                let dims: Vec<usize> = parts.iter().map(|p| p.dim()).collect();
                let mut blocks = Vec::new();
                let mut ranges = Vec::new();
                let mut off = 0;
                for f in &fams {
                    blocks.extend(f.ball.blocks().iter().cloned());
                    ranges.push(off..off + f.ball.dim());
                    off += f.ball.dim();
                }
                let image_fns: Vec<ImageFn> = fams.iter().map(|f| f.images.clone()).collect();
                Some(CcFamily::new(
                    ProductBall::new(blocks),
                    Arc::new(move |t| {
                        let mut out = Vec::with_capacity(dims.iter().sum());
                        for (k, f) in image_fns.iter().enumerate() {
                            out.extend(f(&t[ranges[k].clone()]));
                        }
                        out
                    }),
                    "sum of parts",
                ))
            }
            OperatorSpace::SumInf { parts } => {
                let fams: Vec<CcFamily> = parts.iter().map(|p| p.square_family(size)).collect::<Option<_>>()?;
                let k = fams.len();
                let mut blocks = Vec::new();
                let mut ranges = Vec::new();
                let mut off = 0;
                for f in &fams {
                    blocks.extend(f.ball.blocks().iter().cloned());
                    ranges.push(off..off + f.ball.dim());
                    off += f.ball.dim();
                }
                blocks.push(BlockBall::op(size, k * size));
                blocks.push(BlockBall::op(k * size, size));
                let image_fns: Vec<ImageFn> = fams.iter().map(|f| f.images.clone()).collect();
                Some(CcFamily::new(
                    ProductBall::new(blocks),
                    Arc::new(move |t| {
                        let v = CMatrix::from_vec(size, k * size, t[off..off + k * size * size].to_vec()).expect("shape");
                        let w = CMatrix::from_vec(k * size, size, t[off + k * size * size..].to_vec()).expect("shape");
                        let mut out = Vec::new();
                        for (lam, f) in image_fns.iter().enumerate() {
                            let vl = v.submatrix(0, lam * size, size, size);
                            let wl = w.submatrix(lam * size, 0, size, size);
                            out.extend(f(&t[ranges[lam].clone()]).iter().map(|e| &(&vl * e) * &wl));
                        }
                        out
                    }),
                    "compressed direct sum",
                ))
            }
            OperatorSpace::Quotient { .. } => None,
            OperatorSpace::ProjTensor { .. } => {
                let fam = self.families(size).ok()?.into_iter().next()?;
                let shape = fam.images_at(&vec![ZERO; fam.ball.dim()]).first().map(|e| e.shape())?;
                Some(fam.compressed(size, shape))
            }
        }
    }

    /// Parametrization of the unit ball of `M_n(X)`; falls back to radial
    /// retraction with a certified upper bound as the gauge.
    pub fn ball_rep(&self, n: usize) -> BallRep {
        if let Some(rep) = self.structured_ball_rep(n) {
            return rep;
        }
        let space = self.clone();
        let m = self.dim();
        let len = n * n * m;
        let norm_space = space.clone();
        BallRep {
            ball: ProductBall::single(BlockBall::Generic {
                len,
                norm: Arc::new(move |v| {
                    let x = ElementMatrix::new(n, m, v.to_vec()).expect("length");
                    norm_space.norm_upper(&x).unwrap_or(f64::INFINITY)
                }),
            }),
            coords: Arc::new(move |v| ElementMatrix::new(n, m, v.to_vec()).expect("length")),
            warm: vec![],
            complete: space.is_exact(),
        }
    }

    fn structured_ball_rep(&self, n: usize) -> Option<BallRep> {
        let m = self.dim();
        match self {
            OperatorSpace::Concrete { basis, .. } => {
                let pat = rect_pattern(basis)?;
                let (rr, cc) = (n * pat.rows, n * pat.cols);
                let mut map = Vec::with_capacity(n * n * m);
                for i in 0..n {
                    for j in 0..n {
                        for &(r, c) in &pat.pos {
                            map.push((i * pat.rows + r) * cc + (j * pat.cols + c));
                        }
                    }
                }
                Some(BallRep {
                    ball: ProductBall::single(BlockBall::Operator {
                        rows: rr,
                        cols: cc,
                        map: Some(map),
                    }),
                    coords: Arc::new(move |v| ElementMatrix::new(n, m, v.to_vec()).expect("length")),
                    warm: vec![],
                    complete: true,
                })
            }
            OperatorSpace::Dual { base, pairing } => {
                let OperatorSpace::Concrete { rows, cols, basis } = &**base else { return None };
                let pinv_t = inverse(pairing).ok()?.transpose();
                if n == 1 && rect_pattern(basis).is_some() && basis.len() == rows * cols {
                    // ‖f‖ = ‖G‖_1 with G the matrix of Pᵀ f over the pattern
                    let pat = rect_pattern(basis)?;
                    let (pr, pc) = (pat.rows, pat.cols);
                    let pos = pat.pos.clone();
                    return Some(BallRep {
                        ball: ProductBall::single(BlockBall::Trace {
                            rows: pr,
                            cols: pc,
                            map: None,
                        }),
                        coords: Arc::new(move |g| {
                            let vals: Vec<C64> = pos.iter().map(|&(r, c)| g[r * pc + c]).collect();
                            ElementMatrix::single(&pinv_t.mul_vec(&vals))
                        }),
                        warm: vec![],
                        complete: true,
                    });
                }
                Some(dual_param_rep(*rows, *cols, basis.clone(), pinv_t, n))
            }
            OperatorSpace::SumInf { parts } => {
                let reps: Vec<BallRep> = parts.iter().map(|p| p.structured_ball_rep(n)).collect::<Option<_>>()?;
                let dims: Vec<usize> = parts.iter().map(|p| p.dim()).collect();
                let mut blocks = Vec::new();
                let mut ranges = Vec::new();
                let mut off = 0;
                for r in &reps {
                    blocks.extend(r.ball.blocks().iter().cloned());
                    ranges.push(off..off + r.ball.dim());
                    off += r.ball.dim();
                }
                let complete = reps.iter().all(|r| r.complete);
                let coord_fns: Vec<CoordFn> = reps.iter().map(|r| r.coords.clone()).collect();
                Some(BallRep {
                    ball: ProductBall::new(blocks),
                    coords: Arc::new(move |t| {
                        let pieces: Vec<ElementMatrix> =
                            coord_fns.iter().enumerate().map(|(k, f)| f(&t[ranges[k].clone()])).collect();
                        ElementMatrix::from_entries(n, m, |i, j| {
                            let mut v = Vec::with_capacity(m);
                            for (k, p) in pieces.iter().enumerate() {
                                debug_assert_eq!(p.dim(), dims[k]);
                                v.extend_from_slice(p.entry(i, j));
                            }
                            v
                        })
                    }),
                    warm: vec![],
                    complete,
                })
            }
            _ => None,
        }
    }
}

/// Coordinates `lo..hi` of every entry.
pub fn restrict(x: &ElementMatrix, lo: usize, hi: usize) -> ElementMatrix {
    ElementMatrix::from_entries(x.level(), hi - lo, |i, j| x.entry(i, j)[lo..hi].to_vec())
}

/// `b ↦ V (b ⊗ 1_s) W` restricted to the span of `basis`, with
/// `s = size · min(rows, cols)`; by the Wittstock factorization every
/// complete contraction into `M_size` has this form.
fn concrete_square_family(rows: usize, cols: usize, basis: &[CMatrix], size: usize) -> CcFamily {
    let s = size * rows.min(cols).max(1);
    let basis = basis.to_vec();
    let ball = ProductBall::new(vec![BlockBall::op(size, rows * s), BlockBall::op(cols * s, size)]);
    let nv = size * rows * s;
    CcFamily::new(
        ball,
        Arc::new(move |t| {
            let v = CMatrix::from_vec(size, rows * s, t[..nv].to_vec()).expect("shape");
            let w = CMatrix::from_vec(cols * s, size, t[nv..].to_vec()).expect("shape");
            let prods = block_products(&v, &w, rows, cols, s);
            basis
                .iter()
                .map(|b| {
                    let mut acc = CMatrix::zeros(size, size);
                    for p in 0..rows {
                        for q in 0..cols {
                            if b[(p, q)] != ZERO {
                                acc.add_scaled(b[(p, q)], &prods[p * cols + q]);
                            }
                        }
                    }
                    acc
                })
                .collect()
        }),
        "wittstock",
    )
}

/// `V_p W_q` for the column blocks `V_p` of `V` and row blocks `W_q` of `W`.
fn block_products(v: &CMatrix, w: &CMatrix, rows: usize, cols: usize, s: usize) -> Vec<CMatrix> {
    let size = v.rows();
    let vb: Vec<CMatrix> = (0..rows).map(|p| v.submatrix(0, p * s, size, s)).collect();
    let wb: Vec<CMatrix> = (0..cols).map(|q| w.submatrix(q * s, 0, s, w.cols())).collect();
    let mut out = Vec::with_capacity(rows * cols);
    for vp in &vb {
        for wq in &wb {
            out.push(vp * wq);
        }
    }
    out
}

/// Ball of `M_n(X*)` for concrete `X`: `f_ij = P^{-T} [⟨φ(B_m)⟩_ij]_m` where
/// `φ = V(· ⊗ 1_s)W` ranges over the complete contractions `X → M_n`.
fn dual_param_rep(rows: usize, cols: usize, basis: Vec<CMatrix>, pinv_t: CMatrix, n: usize) -> BallRep {
    let fam = concrete_square_family(rows, cols, &basis, n);
    let m = basis.len();
    let images = fam.images.clone();
    BallRep {
        ball: fam.ball,
        coords: Arc::new(move |t| {
            let imgs = images(t);
            ElementMatrix::from_entries(n, m, |i, j| {
                let vals: Vec<C64> = imgs.iter().map(|e| e[(i, j)]).collect();
                pinv_t.mul_vec(&vals)
            })
        }),
        warm: vec![],
        complete: true,
    }
}

/// Functionals in the dual unit ball of `norm`, as 1×1 images.
pub fn functional_family(norm: &BanachNorm) -> CcFamily {
    let scalar_images = |block: BlockBall, label: &str| {
        CcFamily::new(
            ProductBall::single(block),
            Arc::new(|t: &[C64]| t.iter().map(|z| CMatrix::from_vec(1, 1, vec![*z]).unwrap()).collect()),
            label.to_string(),
        )
    };
    match norm {
        BanachNorm::Modulus => scalar_images(BlockBall::Euclidean(1), "dual ball"),
        BanachNorm::Euclidean { dim } => scalar_images(BlockBall::Euclidean(*dim), "dual ball"),
        BanachNorm::L1 { dim } => scalar_images(BlockBall::LInf(*dim), "dual ball"),
        BanachNorm::LInf { dim } => scalar_images(BlockBall::L1(*dim), "dual ball"),
        BanachNorm::Operator { rows, cols } => scalar_images(
            BlockBall::Trace {
                rows: *rows,
                cols: *cols,
                map: None,
            },
            "dual ball",
        ),
        BanachNorm::Trace { rows, cols } => scalar_images(BlockBall::op(*rows, *cols), "dual ball"),
        BanachNorm::Pullback { inner, map } => functional_family(inner).pullback(map, "pullback"),
        BanachNorm::Level1 { space } => match space.square_family(1) {
            Some(f) => f,
            None => {
                let fam = space.families(1).ok().and_then(|f| f.into_iter().next());
                match fam {
                    Some(f) => {
                        let shape = f.images_at(&vec![ZERO; f.ball.dim()]).first().map_or((1, 1), |e| e.shape());
                        f.compressed(1, shape)
                    }
                    None => CcFamily::fixed(vec![CMatrix::zeros(1, 1); space.dim()], "none"),
                }
            }
        },
    }
}

/// `‖x‖_min ≤ (Σ_ij ‖x_ij‖²)^{1/2}`.
fn frobenius_bound(norm: &BanachNorm, x: &ElementMatrix) -> f64 {
    let n = x.level();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = norm.norm(x.entry(i, j));
            s += v * v;
        }
    }
    s.sqrt()
}

/// Upper bounds for the max quantization from diagonal factorizations
/// `x = α D β` with `‖x‖ ≤ ‖α‖ max_k ‖d_k‖ ‖β‖`.
fn max_upper(norm: &BanachNorm, x: &ElementMatrix) -> f64 {
    let n = x.level();
    let m = x.dim();
    let a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| norm.norm(x.entry(i, j))).collect()).collect();
    // α_{i,(i,j)} = √a_ij, β_{(i,j),j} = √a_ij, d_(i,j) = x_ij / a_ij
    let row_max = (0..n).map(|i| a[i].iter().sum::<f64>()).fold(0.0, f64::max);
    let col_max = (0..n).map(|j| (0..n).map(|i| a[i][j]).sum::<f64>()).fold(0.0, f64::max);
    let schur = (row_max * col_max).sqrt();
    // x = Σ_c X_c ⊗ e_c and ‖X ⊗ e‖_max = ‖X‖ ‖e‖
    let mut split = 0.0;
    for c in 0..m {
        let mut e = vec![ZERO; m];
        e[c] = ONE;
        split += operator_norm(&x.coordinate_matrix(c)) * norm.norm(&e);
    }
    // rotate the coordinates along the SVD of the stacked coefficient matrix
    let stacked = CMatrix::from_fn(n * n, m, |r, c| x.entry(r / n, r % n)[c]);
    let d = crate::numerics::linalg::svd(&stacked);
    let mut rotated = 0.0;
    for k in 0..d.s.len() {
        if d.s[k] == 0.0 {
            continue;
        }
        let e: Vec<C64> = (0..m).map(|c| d.v[(c, k)].conj()).collect();
        let xk = CMatrix::from_fn(n, n, |i, j| d.u[(i * n + j, k)] * d.s[k]);
        rotated += operator_norm(&xk) * norm.norm(&e);
    }
    schur.min(split).min(rotated)
}

/// Upper bound of `‖f‖_{M_n(X*)}`: the cb norm of an extension of
/// `Φ_f: X → M_n` to the ambient matrix space.
fn dual_upper(base: &OperatorSpace, pairing: &CMatrix, x: &ElementMatrix, stop_at: f64) -> Result<f64> {
    let OperatorSpace::Concrete { rows, cols, .. } = base else {
        return Ok(f64::INFINITY);
    };
    let n = x.level();
    let bm = base.basis_matrix().expect("concrete");
    let m = bm.cols();
    // B⁺ = (B†B)⁻¹ B†
    let gram = &bm.adjoint() * &bm;
    let bplus = &inverse(&gram)? * &bm.adjoint();
    let pb = pairing * &bplus;
    let mut l = CMatrix::zeros(n * n, rows * cols);
    for i in 0..n {
        for j in 0..n {
            let f = x.entry(i, j);
            for t in 0..rows * cols {
                let mut s = ZERO;
                for c in 0..m {
                    s += f[c] * pb[(c, t)];
                }
                l[(i * n + j, t)] = s;
            }
        }
    }
    if n == 1 && m == rows * cols {
        // level 1 over the full matrix space: the functional norm is exact
        let g = CMatrix::from_vec(*rows, *cols, l.row(0).to_vec())?;
        return Ok(crate::numerics::trace_norm(&g));
    }
    Ok(cb_upper_until(&l, (n, n), (*rows, *cols), stop_at).value)
}

/// Lower bound of the norm of a linear functional `v ↦ Σ g_c v_c` ... kept
/// for reports: the largest singular value of the coefficient matrix.
pub fn spectral_scale(x: &ElementMatrix) -> f64 {
    let n = x.level();
    let stacked = CMatrix::from_fn(n * n, x.dim(), |r, c| x.entry(r / n, r % n)[c]);
    singular_values(&stacked).first().copied().unwrap_or(0.0)
}

/// `kron` over image lists: `E_{(c,e)} = E_c ⊗ F_e` at index `c·|F| + e`.
pub fn kron_images(a: &[CMatrix], b: &[CMatrix]) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(kron(x, y));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::{gaussian_vec, rng_for};
    use crate::numerics::{c, trace_norm};
    use crate::opspace::space::*;

    fn cfg() -> OptimizerConfig {
        OptimizerConfig::with_seed(7).restarts(4)
    }

    fn random_element(seed: u64, n: usize, m: usize) -> ElementMatrix {
        ElementMatrix::new(n, m, gaussian_vec(&mut rng_for(seed, 0), n * n * m)).unwrap()
    }

    #[test]
    fn matrix_space_values() {
        let m2 = matrix_space(2);
        let id = ElementMatrix::single(&[ONE, ZERO, ZERO, ONE]);
        assert!((m2.norm(&id, &cfg()).unwrap().lower - 1.0).abs() < 1e-12);
        // [[e00, e10], [e01, e11]] assembles to the swap permutation
        let swap = ElementMatrix::from_entries(2, 4, |i, j| {
            let mut v = vec![ZERO; 4];
            v[j * 2 + i] = ONE;
            v
        });
        let est = m2.norm(&swap, &cfg()).unwrap();
        assert!((est.lower - 1.0).abs() < 1e-12 && est.upper == est.lower);
        // [[e00, e01], [e10, e11]] assembles to the rank-one Σ e_ij ⊗ e_ij
        let x = ElementMatrix::from_entries(2, 4, |i, j| {
            let mut v = vec![ZERO; 4];
            v[i * 2 + j] = ONE;
            v
        });
        assert!((m2.norm(&x, &cfg()).unwrap().lower - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trace_class_level_one_is_trace_norm() {
        let t = trace_class(2);
        for s in 0..5 {
            let x = random_element(s, 1, 4);
            let est = t.norm(&x, &cfg()).unwrap();
            let f = CMatrix::from_vec(2, 2, x.coords().to_vec()).unwrap();
            let tn = trace_norm(&f);
            assert!((est.lower - tn).abs() < 1e-9, "{} vs {tn}", est.lower);
            assert!((est.upper - tn).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_class_level_two_interval() {
        let t = trace_class(2);
        let x = random_element(3, 2, 4);
        let est = t.norm(&x, &cfg()).unwrap();
        assert!(est.is_sound(1e-9));
        assert!(est.gap() < 1e-4 * est.upper.max(1.0), "{est:?}");
        let back = t.evaluate_witness(&x, &est.witness).unwrap();
        assert!((back - est.lower).abs() < 1e-9);
    }

    #[test]
    fn column_hilbert_is_euclidean() {
        let h = column_hilbert(3);
        let v = vec![c(1.0, 2.0), c(0.0, -1.0), c(0.5, 0.0)];
        let est = h.norm(&ElementMatrix::single(&v), &cfg()).unwrap();
        let e = crate::numerics::cmatrix::vec_norm(&v);
        assert!((est.lower - e).abs() < 1e-12);
    }

    #[test]
    fn min_and_max_on_scalars_agree() {
        let mn = min_quant(BanachNorm::Modulus).unwrap();
        let mx = max_quant(BanachNorm::Modulus).unwrap();
        for lvl in 1..=3 {
            let x = random_element(lvl as u64, lvl, 1);
            let a = mn.norm(&x, &cfg()).unwrap();
            let b = mx.norm(&x, &cfg()).unwrap();
            let exact = operator_norm(&x.coordinate_matrix(0));
            for e in [&a, &b] {
                assert!(e.lower <= exact + 1e-9 && e.upper >= exact - 1e-9);
                assert!(e.gap() < 1e-6, "{e:?}");
            }
        }
    }

    #[test]
    fn sums_on_scalars() {
        let s_inf = direct_sum_inf(vec![matrix_space(1), matrix_space(1)]);
        let s_1 = direct_sum_1(vec![matrix_space(1), matrix_space(1)]);
        let x = ElementMatrix::single(&[ONE, -ONE]);
        assert!((s_inf.norm(&x, &cfg()).unwrap().lower - 1.0).abs() < 1e-12);
        let e = s_1.norm(&x, &cfg()).unwrap();
        assert!((e.lower - 2.0).abs() < 1e-9 && (e.upper - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_space_norms_vanish() {
        let z = matrix_space(0);
        let x = ElementMatrix::zeros(2, 0);
        assert_eq!(z.norm(&x, &cfg()).unwrap().upper, 0.0);
    }

    #[test]
    fn rect_pattern_detection() {
        let OperatorSpace::Concrete { basis, .. } = column_hilbert(2) else { panic!() };
        let p = rect_pattern(&basis).unwrap();
        assert_eq!((p.rows, p.cols), (2, 1));
        let diag: Vec<CMatrix> = (0..2).map(|i| CMatrix::unit(2, 2, i, i)).collect();
        assert!(rect_pattern(&diag).is_none());
    }
}
