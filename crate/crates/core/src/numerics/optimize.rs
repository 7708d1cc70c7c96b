//! Seeded multi-restart ascent over (products of) unit balls.
//!
//! The objective is maximized over a point `x` split into blocks, each
//! constrained to its own unit ball. When a gradient and a linear maximization
//! oracle (LMO) are available a block is replaced by `lmo(grad)`, which never
//! decreases a convex objective. Without an LMO the block takes projected
//! gradient steps with radial retraction onto the ball, and without a
//! gradient a (1+1) random search is used.
//!
//! Gradient convention: `df = Re Σ conj(g_c) dx_c`.

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cmatrix::{vec_norm, CMatrix, C64, ONE, ZERO};
use super::linalg::{operator_norm, polar_factor, svd, trace_norm};
use super::random::{gaussian_vec, rng_for};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptimizerConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub value_tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 16,
            max_iterations: 200,
            step_tolerance: 1e-10,
            value_tolerance: 1e-12,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    /// Relative precision at which optimizers and certificate searches may stop.
    pub fn value_tolerance(mut self, tol: f64) -> Self {
        self.value_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Invalid("restarts must be at least 1".into()));
        }
        if !(self.step_tolerance > 0.0 && self.value_tolerance > 0.0) {
            return Err(Error::Invalid("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Derived config for an inner problem, on its own seed family.
    pub fn derived(&self, salt: u64) -> Self {
        let mut c = self.clone();
        c.seed = self
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(salt.wrapping_mul(0xD1B5_4A32_D192_ED03))
            .rotate_left(17);
        c
    }
}

/// Interval estimate of a norm: `lower` is attained by the recorded witness,
/// `upper` is backed by an explicit factorization (or is `+∞`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub lower: f64,
    #[serde(with = "super::json::inf_as_null")]
    pub upper: f64,
    pub witness: serde_json::Value,
    pub converged: bool,
}

impl NormEstimate {
    pub fn exact(value: f64, witness: serde_json::Value) -> Self {
        Self {
            lower: value,
            upper: value,
            witness,
            converged: true,
        }
    }

    pub fn lower_only(lower: f64, witness: serde_json::Value, converged: bool) -> Self {
        Self {
            lower,
            upper: f64::INFINITY,
            witness,
            converged,
        }
    }

    pub fn zero() -> Self {
        Self::exact(0.0, serde_json::Value::Null)
    }

    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_sound(&self, tol: f64) -> bool {
        self.lower >= 0.0 && self.lower <= self.upper + tol
    }

    /// Midpoint when the interval is finite, otherwise the lower bound.
    pub fn value(&self) -> f64 {
        if self.upper.is_finite() {
            0.5 * (self.lower + self.upper)
        } else {
            self.lower
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            lower: self.lower * s,
            upper: self.upper * s,
            witness: self.witness.clone(),
            converged: self.converged,
        }
    }
}

/// Unit ball of a single block of coordinates.
#[derive(Clone)]
pub enum BlockBall {
    /// Euclidean ball.
    Euclidean(usize),
    /// `ℓ¹` ball.
    L1(usize),
    /// `ℓ∞` ball.
    LInf(usize),
    /// Operator-norm ball of `rows × cols` matrices. Coordinate `t` sits at
    /// row-major position `map[t]` (identity when `map` is `None`); positions
    /// not hit by the map are zero.
    Operator { rows: usize, cols: usize, map: Option<Vec<usize>> },
    /// Trace-norm ball with the same coordinate placement as `Operator`.
    Trace { rows: usize, cols: usize, map: Option<Vec<usize>> },
    /// Arbitrary positively homogeneous norm without an LMO.
    Generic { len: usize, norm: Arc<dyn Fn(&[C64]) -> f64 + Send + Sync> },
}

impl std::fmt::Debug for BlockBall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlockBall::Euclidean(n) => write!(f, "Euclidean({n})"),
            BlockBall::L1(n) => write!(f, "L1({n})"),
            BlockBall::LInf(n) => write!(f, "LInf({n})"),
            BlockBall::Operator { rows, cols, .. } => write!(f, "Operator({rows}x{cols})"),
            BlockBall::Trace { rows, cols, .. } => write!(f, "Trace({rows}x{cols})"),
            BlockBall::Generic { len, .. } => write!(f, "Generic({len})"),
        }
    }
}

impl BlockBall {
    pub fn op(rows: usize, cols: usize) -> Self {
        BlockBall::Operator { rows, cols, map: None }
    }

    pub fn len(&self) -> usize {
        match self {
            BlockBall::Euclidean(n) | BlockBall::L1(n) | BlockBall::LInf(n) => *n,
            BlockBall::Operator { rows, cols, map } | BlockBall::Trace { rows, cols, map } => {
                map.as_ref().map_or(rows * cols, |m| m.len())
            }
            BlockBall::Generic { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn to_matrix(rows: usize, cols: usize, map: &Option<Vec<usize>>, x: &[C64]) -> CMatrix {
        match map {
            None => CMatrix::from_vec(rows, cols, x.to_vec()).expect("block length"),
            Some(m) => {
                let mut out = CMatrix::zeros(rows, cols);
                for (t, &pos) in m.iter().enumerate() {
                    out.data_mut()[pos] = x[t];
                }
                out
            }
        }
    }

    fn from_matrix(map: &Option<Vec<usize>>, a: &CMatrix) -> Vec<C64> {
        match map {
            None => a.data().to_vec(),
            Some(m) => m.iter().map(|&pos| a.data()[pos]).collect(),
        }
    }

    pub fn norm(&self, x: &[C64]) -> f64 {
        match self {
            BlockBall::Euclidean(_) => vec_norm(x),
            BlockBall::L1(_) => x.iter().map(|z| z.norm()).sum(),
            BlockBall::LInf(_) => x.iter().map(|z| z.norm()).fold(0.0, f64::max),
            BlockBall::Operator { rows, cols, map } => operator_norm(&Self::to_matrix(*rows, *cols, map, x)),
            BlockBall::Trace { rows, cols, map } => trace_norm(&Self::to_matrix(*rows, *cols, map, x)),
            BlockBall::Generic { norm, .. } => norm(x),
        }
    }

    pub fn has_lmo(&self) -> bool {
        !matches!(self, BlockBall::Generic { .. })
    }

    /// `argmax Re⟨g, x⟩` over the ball, or `None` without an oracle.
    pub fn lmo(&self, g: &[C64]) -> Option<Vec<C64>> {
        let out = match self {
            BlockBall::Euclidean(_) => {
                let n = vec_norm(g);
                if n == 0.0 {
                    let mut e = vec![ZERO; g.len()];
                    if let Some(first) = e.first_mut() {
                        *first = ONE;
                    }
                    e
                } else {
                    g.iter().map(|z| z / n).collect()
                }
            }
            BlockBall::L1(_) => {
                let mut e = vec![ZERO; g.len()];
                let best = g
                    .iter()
                    .enumerate()
                    .fold((0usize, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
                if !e.is_empty() {
                    e[best.0] = phase(g[best.0]);
                }
                e
            }
            BlockBall::LInf(_) => g.iter().map(|&z| phase(z)).collect(),
            BlockBall::Operator { rows, cols, map } => {
                let gm = Self::to_matrix(*rows, *cols, map, g);
                Self::from_matrix(map, &polar_factor(&gm))
            }
            BlockBall::Trace { rows, cols, map } => {
                let gm = Self::to_matrix(*rows, *cols, map, g);
                let d = svd(&gm);
                let top = if d.s.is_empty() {
                    CMatrix::zeros(*rows, *cols)
                } else {
                    CMatrix::outer(&d.u.col(0), &d.v.col(0))
                };
                Self::from_matrix(map, &top)
            }
            BlockBall::Generic { .. } => return None,
        };
        Some(out)
    }

    /// Radial retraction onto the ball.
    pub fn retract(&self, x: &[C64]) -> Vec<C64> {
        let n = self.norm(x);
        if n > 1.0 {
            x.iter().map(|z| z / n).collect()
        } else {
            x.to_vec()
        }
    }
}

fn phase(z: C64) -> C64 {
    let n = z.norm();
    if n == 0.0 {
        ONE
    } else {
        z / n
    }
}

/// Product of block balls (the unit ball of the max of the block norms).
#[derive(Clone, Debug, Default)]
pub struct ProductBall {
    blocks: Vec<BlockBall>,
    offsets: Vec<usize>,
}

impl ProductBall {
    pub fn new(blocks: Vec<BlockBall>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for b in &blocks {
            acc += b.len();
            offsets.push(acc);
        }
        Self { blocks, offsets }
    }

    pub fn single(block: BlockBall) -> Self {
        Self::new(vec![block])
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn blocks(&self) -> &[BlockBall] {
        &self.blocks
    }

    pub fn range(&self, b: usize) -> Range<usize> {
        self.offsets[b]..self.offsets[b + 1]
    }

    pub fn norm(&self, x: &[C64]) -> f64 {
        (0..self.blocks.len())
            .map(|b| self.blocks[b].norm(&x[self.range(b)]))
            .fold(0.0, f64::max)
    }

    /// A random extreme point: each block is the LMO of a Gaussian direction
    /// (or a retracted Gaussian vector for generic blocks).
    pub fn random_point(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<C64> {
        let mut x = Vec::with_capacity(self.dim());
        for b in &self.blocks {
            let g = gaussian_vec(rng, b.len());
            match b.lmo(&g) {
                Some(p) => x.extend(p),
                None => {
                    let n = b.norm(&g);
                    x.extend(g.iter().map(|z| if n > 0.0 { z / n } else { *z }));
                }
            }
        }
        x
    }

    pub fn concat(mut self, other: ProductBall) -> ProductBall {
        self.blocks.extend(other.blocks);
        ProductBall::new(self.blocks)
    }
}

/// Objective to be maximized.
pub trait Objective {
    fn value(&self, x: &[C64]) -> f64;

    /// Gradient with respect to the coordinates in `range` (others fixed).
    fn gradient(&self, _x: &[C64], _range: Range<usize>) -> Option<Vec<C64>> {
        None
    }
}

/// Objective given only by a closure; optimized derivative-free.
pub struct FnObjective<F: Fn(&[C64]) -> f64>(pub F);

impl<F: Fn(&[C64]) -> f64> Objective for FnObjective<F> {
    fn value(&self, x: &[C64]) -> f64 {
        (self.0)(x)
    }
}

/// `x ↦ ‖F(x)‖_op` for a map `F` that is complex-linear (affine) in every
/// single coordinate; this covers every multi-affine assembly used in the
/// crate. The gradient is obtained exactly by probing `F(x + e_c) − F(x)`.
pub struct MatrixNormObjective<F: Fn(&[C64]) -> CMatrix> {
    pub map: F,
}

impl<F: Fn(&[C64]) -> CMatrix> MatrixNormObjective<F> {
    pub fn new(map: F) -> Self {
        Self { map }
    }
}

impl<F: Fn(&[C64]) -> CMatrix> Objective for MatrixNormObjective<F> {
    fn value(&self, x: &[C64]) -> f64 {
        operator_norm(&(self.map)(x))
    }

    fn gradient(&self, x: &[C64], range: Range<usize>) -> Option<Vec<C64>> {
        let base = (self.map)(x);
        let d = svd(&base);
        if d.s.is_empty() {
            return Some(vec![ZERO; range.len()]);
        }
        let u = d.u.col(0);
        let v = d.v.col(0);
        let mut probe = x.to_vec();
        let mut g = Vec::with_capacity(range.len());
        for cidx in range {
            let old = probe[cidx];
            probe[cidx] = old + ONE;
            let moved = (self.map)(&probe);
            probe[cidx] = old;
            // u† (F(x+e_c) − F(x)) v
            let mut s = ZERO;
            for i in 0..base.rows() {
                let ui = u[i].conj();
                if ui == ZERO {
                    continue;
                }
                for j in 0..base.cols() {
                    let dlt = moved[(i, j)] - base[(i, j)];
                    s += ui * dlt * v[j];
                }
            }
            g.push(s.conj());
        }
        Some(g)
    }
}

/// Result of a maximization run.
#[derive(Clone, Debug)]
pub struct OptimumPoint {
    pub value: f64,
    pub point: Vec<C64>,
    pub restart: usize,
    pub converged: bool,
}

impl OptimumPoint {
    pub fn to_estimate(&self) -> NormEstimate {
        NormEstimate::lower_only(
            self.value.max(0.0),
            serde_json::json!({ "point": super::json::vec_to_json(&self.point), "restart": self.restart }),
            self.converged,
        )
    }
}

/// Maximize `f` over the product ball. Warm starts are run first (retracted
/// into the ball), followed by `config.restarts` random restarts. Restart `r`
/// draws from stream `r` of `config.seed`, so adding restarts never lowers
/// the result and identical configs give identical results.
pub fn maximize<O: Objective + ?Sized>(
    f: &O,
    ball: &ProductBall,
    config: &OptimizerConfig,
    warm: &[Vec<C64>],
) -> Result<OptimumPoint> {
    config.validate()?;
    let mut best: Option<OptimumPoint> = None;
    let total = warm.len() + config.restarts;
    for r in 0..total {
        let mut rng = rng_for(config.seed, r as u64);
        let start = if r < warm.len() {
            retract_all(ball, &warm[r])
        } else {
            ball.random_point(&mut rng)
        };
        let cand = ascend(f, ball, config, start, &mut rng, r)?;
        if best.as_ref().is_none_or(|b| cand.value > b.value) {
            best = Some(cand);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Spec-level entry point: a single ball given by a norm oracle and an
/// optional LMO block description. Returns the best value with a witness.
pub fn maximize_over_unit_ball<O: Objective + ?Sized>(
    f: &O,
    ball: &ProductBall,
    config: &OptimizerConfig,
) -> Result<NormEstimate> {
    Ok(maximize(f, ball, config, &[])?.to_estimate())
}

fn retract_all(ball: &ProductBall, x: &[C64]) -> Vec<C64> {
    assert_eq!(x.len(), ball.dim(), "warm start has wrong length");
    let mut out = Vec::with_capacity(x.len());
    for (b, blk) in ball.blocks().iter().enumerate() {
        out.extend(blk.retract(&x[ball.range(b)]));
    }
    out
}

fn checked(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::ObjectiveDiverged)
    }
}

fn ascend<O: Objective + ?Sized>(
    f: &O,
    ball: &ProductBall,
    config: &OptimizerConfig,
    mut x: Vec<C64>,
    rng: &mut rand_chacha::ChaCha8Rng,
    restart: usize,
) -> Result<OptimumPoint> {
    let mut v = checked(f.value(&x))?;
    let nblocks = ball.blocks().len();
    let mut sigma = vec![0.3; nblocks];
    let mut step_size = vec![1.0; nblocks];
    let mut converged = false;
    for _it in 0..config.max_iterations {
        let start_value = v;
        let mut max_step: f64 = 0.0;
        for b in 0..nblocks {
            let range = ball.range(b);
            if range.is_empty() {
                continue;
            }
            let blk = &ball.blocks()[b];
            let grad = f.gradient(&x, range.clone());
            match grad {
                Some(g) if blk.has_lmo() => {
                    let target = blk.lmo(&g).expect("lmo");
                    let mut cand = x.clone();
                    cand[range.clone()].copy_from_slice(&target);
                    let vc = checked(f.value(&cand))?;
                    if vc > v {
                        max_step = max_step.max(dist(&x[range.clone()], &target));
                        x = cand;
                        v = vc;
                    }
                }
                Some(g) => {
                    let gn = vec_norm(&g);
                    if gn == 0.0 {
                        continue;
                    }
                    let mut eta = step_size[b];
                    for _ in 0..30 {
                        let moved: Vec<C64> = x[range.clone()]
                            .iter()
                            .zip(&g)
                            .map(|(xi, gi)| xi + gi * (eta / gn))
                            .collect();
                        let moved = blk.retract(&moved);
                        let mut cand = x.clone();
                        cand[range.clone()].copy_from_slice(&moved);
                        let vc = checked(f.value(&cand))?;
                        if vc > v {
                            max_step = max_step.max(dist(&x[range.clone()], &moved));
                            x = cand;
                            v = vc;
                            step_size[b] = (eta * 2.0).min(4.0);
                            break;
                        }
                        eta *= 0.5;
                    }
                    if eta < step_size[b] {
                        step_size[b] = eta.max(1e-12);
                    }
                }
                None => {
                    // (1+1) random search with boundary normalization.
                    let noise = gaussian_vec(rng, range.len());
                    let nn = vec_norm(&noise).max(f64::MIN_POSITIVE);
                    let moved: Vec<C64> = x[range.clone()]
                        .iter()
                        .zip(&noise)
                        .map(|(xi, ni)| xi + ni * (sigma[b] / nn))
                        .collect();
                    let nrm = blk.norm(&moved);
                    let moved: Vec<C64> = if nrm > 0.0 {
                        moved.iter().map(|z| z / nrm).collect()
                    } else {
                        moved
                    };
                    let mut cand = x.clone();
                    cand[range.clone()].copy_from_slice(&moved);
                    let vc = checked(f.value(&cand))?;
                    if vc > v {
                        max_step = max_step.max(dist(&x[range.clone()], &moved));
                        x = cand;
                        v = vc;
                        sigma[b] = (sigma[b] * 1.5).min(2.0);
                    } else {
                        sigma[b] *= 0.85;
                    }
                }
            }
        }
        let improvement = v - start_value;
        let searching = f.gradient(&x, 0..0).is_none();
        if searching {
            // random search: stop once every active step size has collapsed
            if sigma.iter().all(|&s| s < config.step_tolerance.max(1e-7)) {
                converged = true;
                break;
            }
            continue;
        }
        if improvement <= config.value_tolerance * v.abs().max(1.0) || max_step < config.step_tolerance {
            converged = true;
            break;
        }
    }
    Ok(OptimumPoint {
        value: v,
        point: x,
        restart,
        converged,
    })
}

fn dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cmatrix::c;

    #[test]
    fn euclidean_norm_over_euclidean_ball() {
        let f = MatrixNormObjective::new(|x: &[C64]| CMatrix::column(x));
        let ball = ProductBall::single(BlockBall::Euclidean(3));
        let est = maximize_over_unit_ball(&f, &ball, &OptimizerConfig::with_seed(1)).unwrap();
        assert!((est.lower - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_modulus_over_operator_ball() {
        let f = MatrixNormObjective::new(|x: &[C64]| {
            CMatrix::from_vec(1, 1, vec![x[0] + x[3]]).unwrap()
        });
        let ball = ProductBall::single(BlockBall::op(2, 2));
        let est = maximize_over_unit_ball(&f, &ball, &OptimizerConfig::with_seed(2)).unwrap();
        assert!((est.lower - 2.0).abs() < 1e-9, "{}", est.lower);
    }

    #[test]
    fn derivative_free_path_finds_trace_bound() {
        let f = FnObjective(|x: &[C64]| (x[0] + x[3]).norm());
        let opnorm = Arc::new(|x: &[C64]| operator_norm(&CMatrix::from_vec(2, 2, x.to_vec()).unwrap()));
        let ball = ProductBall::single(BlockBall::Generic { len: 4, norm: opnorm });
        let cfg = OptimizerConfig {
            max_iterations: 3000,
            ..OptimizerConfig::with_seed(5)
        };
        let est = maximize_over_unit_ball(&f, &ball, &cfg).unwrap();
        assert!(est.lower > 1.9 && est.lower <= 2.0 + 1e-12, "{}", est.lower);
    }

    #[test]
    fn constant_zero() {
        let f = FnObjective(|_: &[C64]| 0.0);
        let ball = ProductBall::single(BlockBall::Euclidean(2));
        let est = maximize_over_unit_ball(&f, &ball, &OptimizerConfig::with_seed(0).restarts(2)).unwrap();
        assert_eq!(est.lower, 0.0);
    }

    #[test]
    fn diverging_objective_is_reported() {
        let f = FnObjective(|_: &[C64]| f64::NAN);
        let ball = ProductBall::single(BlockBall::Euclidean(2));
        let err = maximize_over_unit_ball(&f, &ball, &OptimizerConfig::default()).unwrap_err();
        assert!(matches!(err, Error::ObjectiveDiverged));
    }

    #[test]
    fn bilinear_blocks() {
        // |x† A y| over two Euclidean balls equals ‖A‖.
        let a = CMatrix::from_rows(&[&[c(1.0, 0.0), c(2.0, 1.0)], &[c(0.0, -1.0), c(0.5, 0.0)]]);
        let aa = a.clone();
        let f = MatrixNormObjective::new(move |x: &[C64]| {
            let y = aa.mul_vec(&x[2..]);
            CMatrix::from_vec(1, 1, vec![x[0] * y[0] + x[1] * y[1]]).unwrap()
        });
        let ball = ProductBall::new(vec![BlockBall::Euclidean(2), BlockBall::Euclidean(2)]);
        let est = maximize_over_unit_ball(&f, &ball, &OptimizerConfig::with_seed(3)).unwrap();
        assert!((est.lower - operator_norm(&a)).abs() < 1e-9);
    }

    #[test]
    fn determinism_and_monotonicity() {
        let f = MatrixNormObjective::new(|x: &[C64]| {
            let m = CMatrix::from_vec(2, 2, x.to_vec()).unwrap();
            CMatrix::from_vec(1, 1, vec![m[(0, 1)] * c(2.0, 0.0) + m[(1, 0)]]).unwrap()
        });
        let ball = ProductBall::single(BlockBall::op(2, 2));
        let cfg1 = OptimizerConfig::with_seed(11).restarts(2);
        let cfg2 = OptimizerConfig::with_seed(11).restarts(6);
        let a = maximize_over_unit_ball(&f, &ball, &cfg1).unwrap();
        let b = maximize_over_unit_ball(&f, &ball, &cfg1).unwrap();
        let c2 = maximize_over_unit_ball(&f, &ball, &cfg2).unwrap();
        assert_eq!(a, b);
        assert!(c2.lower >= a.lower);
    }
}
