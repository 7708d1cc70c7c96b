//! Quotient norms `‖[x]‖_n = inf_{k ∈ M_n(N)} ‖x + k‖_n`.
//!
//! Over a concrete base the infimum is a convex problem in the kernel
//! coefficients. The upper bound is the best point found by descent on a
//! smoothed largest eigenvalue; the lower bound is a dual certificate, a
//! trace-class matrix annihilating `M_n(N)`.

use serde_json::json;

use super::element::ElementMatrix;
use super::space::OperatorSpace;
use crate::error::Result;
use crate::numerics::factor::smooth_max;
use crate::numerics::json::vec_to_json;
use crate::numerics::linalg::{hermitian_eigen, operator_norm, solve_least_squares, trace_norm};
use crate::numerics::optimize::{maximize, BlockBall, FnObjective, ProductBall};
use crate::numerics::{CMatrix, NormEstimate, OptimizerConfig, C64, ZERO};

fn parts(q: &OperatorSpace) -> (&OperatorSpace, &CMatrix, &CMatrix) {
    match q {
        OperatorSpace::Quotient { base, kernel, section } => (base, kernel, section),
        _ => unreachable!("quotient oracle called on another kind"),
    }
}

/// Lift to base coordinates through the section.
pub fn lift(q: &OperatorSpace, x: &ElementMatrix) -> ElementMatrix {
    let (_, _, section) = parts(q);
    x.map_coords(section).expect("section matches the quotient dimension")
}

struct Problem {
    a0: CMatrix,
    dirs: Vec<CMatrix>,
}

impl Problem {
    fn at(&self, w: &[C64]) -> CMatrix {
        let mut a = self.a0.clone();
        for (z, d) in w.iter().zip(&self.dirs) {
            if *z != ZERO {
                a.add_scaled(*z, d);
            }
        }
        a
    }

    fn dilation(a: &CMatrix) -> CMatrix {
        let (r, c) = a.shape();
        let mut h = CMatrix::zeros(r + c, r + c);
        h.set_block(0, r, a);
        h.set_block(r, 0, &a.adjoint());
        h
    }

    /// Smoothed `‖A(w)‖` with its gradient and the `(2,1)` block of the
    /// smoothing weight.
    fn smoothed(&self, w: &[C64], mu: f64) -> (f64, Vec<C64>, CMatrix, f64) {
        let a = self.at(w);
        let (r, c) = a.shape();
        let (val, wt, lmax) = smooth_max(&Self::dilation(&a), mu);
        let w21 = wt.submatrix(r, 0, c, r);
        let g = self.dirs.iter().map(|d| (trace_prod(&w21, d) * 2.0).conj()).collect();
        (val, g, w21, lmax)
    }

    /// `|tr(Ŵ A0)| / ‖Ŵ‖_1` for the projection `Ŵ` of `w21` onto the
    /// annihilator of the kernel directions.
    fn certificate(&self, w21: &CMatrix) -> f64 {
        let m = self.dirs.len();
        let mut proj = w21.clone();
        if m > 0 {
            let gram = CMatrix::from_fn(m, m, |p, q| trace_prod(&self.dirs[q].adjoint(), &self.dirs[p]));
            let b: Vec<C64> = self.dirs.iter().map(|d| trace_prod(w21, d)).collect();
            let coef = solve_least_squares(&gram, &b, 1e-13);
            for (cm, d) in coef.iter().zip(&self.dirs) {
                proj.add_scaled(-cm, &d.adjoint());
            }
            // residual annihilation check: discard a numerically bad projection
            let worst = self.dirs.iter().map(|d| trace_prod(&proj, d).norm()).fold(0.0, f64::max);
            if worst > 1e-10 * (1.0 + proj.frobenius_norm()) {
                return 0.0;
            }
        }
        let tn = trace_norm(&proj);
        if tn == 0.0 {
            return 0.0;
        }
        trace_prod(&proj, &self.a0).norm() / tn
    }
}

impl Problem {
    /// Certificate from a density supported near the top eigenspace of the
    /// dilation at `w`, chosen to annihilate the kernel directions as well
    /// as possible (projected gradient over the spectraplex).
    fn polished_certificate(&self, w: &[C64]) -> f64 {
        let a = self.at(w);
        let (r, c) = a.shape();
        let e = hermitian_eigen(&Self::dilation(&a));
        let total = r + c;
        let lmax = e.values[total - 1];
        let mut best: f64 = 0.0;
        for delta in [1e-9, 1e-7, 1e-5, 1e-4, 1e-3, 1e-2] {
            let k = e.values.iter().filter(|&&l| l >= lmax - delta * lmax.abs().max(1e-300)).count();
            let v = e.vectors.submatrix(0, total - k, total, k);
            let v1 = v.submatrix(0, 0, r, k);
            let v2 = v.submatrix(r, 0, c, k);
            // tr(ρ21 A_m) = tr(Z G_m) with G_m = V1† A_m V2
            let gs: Vec<CMatrix> = self.dirs.iter().map(|d| &(&v1.adjoint() * d) * &v2).collect();
            let lip = 2.0 * gs.iter().map(|g| g.frobenius_norm().powi(2)).sum::<f64>() + 1e-300;
            let mut z = CMatrix::identity(k).scale_real(1.0 / k as f64);
            for _ in 0..300 {
                let mut gamma = CMatrix::zeros(k, k);
                let mut res = 0.0;
                for g in &gs {
                    let t = trace_prod(&z, g);
                    res += t.norm_sqr();
                    gamma.add_scaled(t.conj(), g);
                }
                if res < 1e-30 {
                    break;
                }
                let grad = &gamma + &gamma.adjoint();
                let mut step = z.clone();
                step.add_scaled(C64::new(-1.0 / lip, 0.0), &grad);
                z = project_spectraplex(&step);
            }
            let rho21 = &(&v2 * &z) * &v1.adjoint();
            best = best.max(self.certificate(&rho21));
        }
        best
    }
}

/// Euclidean projection onto `{Z ⪰ 0, tr Z = 1}`.
fn project_spectraplex(h: &CMatrix) -> CMatrix {
    let e = hermitian_eigen(&h.hermitian_part());
    let n = e.values.len();
    // simplex projection of the eigenvalues
    let mut sorted = e.values.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        acc += v;
        let t = (acc - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    let mut out = CMatrix::zeros(n, n);
    for k in 0..n {
        let lam = (e.values[k] - theta).max(0.0);
        if lam == 0.0 {
            continue;
        }
        let col = e.vectors.col(k);
        out.add_scaled(C64::new(lam, 0.0), &CMatrix::outer(&col, &col));
    }
    out
}

/// `tr(a b)`.
fn trace_prod(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut s = ZERO;
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

fn build_problem(q: &OperatorSpace, x: &ElementMatrix) -> Option<Problem> {
    let (base, kernel, _) = parts(q);
    let OperatorSpace::Concrete { basis, .. } = base else { return None };
    let n = x.level();
    let a0 = lift(q, x).assemble(basis);
    let kmats: Vec<CMatrix> = (0..kernel.cols())
        .map(|t| base.concrete_matrix(&kernel.col(t)).expect("concrete"))
        .collect();
    let mut dirs = Vec::with_capacity(n * n * kmats.len());
    for i in 0..n {
        for j in 0..n {
            for km in &kmats {
                let mut e = CMatrix::zeros(n, n);
                e[(i, j)] = crate::numerics::ONE;
                dirs.push(crate::numerics::kron(&e, km));
            }
        }
    }
    Some(Problem { a0, dirs })
}

/// Certified upper bound and the kernel coefficients attaining it.
pub fn quotient_upper(q: &OperatorSpace, x: &ElementMatrix, stop_at: f64) -> Result<(f64, Vec<C64>)> {
    let (base, _, _) = parts(q);
    match build_problem(q, x) {
        Some(p) => {
            let (w, best, _) = descend(&p, 1e-11, stop_at);
            Ok((best, w))
        }
        // generic base: the lift itself
        None => Ok((base.norm_upper(&lift(q, x))?, vec![])),
    }
}

/// Returns `(w, ‖A(w)‖, best certificate)`. Accelerated gradient on the
/// log-sum-exp smoothing, with the smoothing parameter driven down until
/// the certificate is within `rel_tol` of the value or the value reaches
/// `stop_at`.
fn descend(p: &Problem, rel_tol: f64, stop_at: f64) -> (Vec<C64>, f64, f64) {
    let m = p.dirs.len();
    // Frobenius least squares start
    let mut w = if m > 0 {
        let rows = p.a0.rows() * p.a0.cols();
        let mat = CMatrix::from_fn(rows, m, |t, k| p.dirs[k].data()[t]);
        let rhs: Vec<C64> = p.a0.data().iter().map(|z| -z).collect();
        solve_least_squares(&mat, &rhs, 1e-13)
    } else {
        vec![]
    };
    let mut best_val = operator_norm(&p.at(&w));
    let mut best_w = w.clone();
    let mut lower: f64 = 0.0;
    if m == 0 || best_val == 0.0 {
        return (best_w, best_val, best_val);
    }
    let scale = best_val;
    let done = |best: f64, low: f64| best - low <= rel_tol.max(1e-11) * scale || best <= stop_at;
    let log_size = ((p.a0.rows() + p.a0.cols()) as f64).ln();
    let mut mu = 0.02 * scale;
    let mut lip = 1.0 / mu;
    let mut budget = 1500usize;
    while mu > 1e-12 * scale && budget > 0 && !done(best_val, lower) {
        let mut y = w.clone();
        let mut t = 1.0f64;
        for _ in 0..300 {
            if budget == 0 {
                break;
            }
            budget -= 1;
            let (val, g, w21, lmax) = p.smoothed(&y, mu);
            if lmax < best_val {
                best_val = lmax;
                best_w = y.clone();
            }
            lower = lower.max(p.certificate(&w21));
            let gn2: f64 = g.iter().map(|z| z.norm_sqr()).sum();
            // the smoothing costs at most μ·ln(size); move on once the
            // certificate is that close
            if gn2 < 1e-32 || done(best_val, lower) || best_val - lower <= 2.0 * mu * log_size {
                break;
            }
            // backtracking on the Lipschitz estimate
            let next = loop {
                let trial: Vec<C64> = y.iter().zip(&g).map(|(a, b)| a - b / lip).collect();
                let (tv, _, _, tl) = p.smoothed(&trial, mu);
                if tv <= val - 0.5 * gn2 / lip + 1e-15 * scale || lip > 1e20 {
                    if tl < best_val {
                        best_val = tl;
                        best_w = trial.clone();
                    }
                    break trial;
                }
                lip *= 2.0;
            };
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            y = next.iter().zip(&w).map(|(a, b)| a + (a - b) * beta).collect();
            w = next;
            t = t_next;
            lip *= 0.9;
        }
        w = best_w.clone();
        mu *= 0.3;
        lip /= 0.3;
    }
    // exact re-evaluation of the kept point
    let exact = operator_norm(&p.at(&best_w));
    lower = lower.max(p.polished_certificate(&best_w));
    (best_w, exact, lower.min(exact))
}

/// Interval estimate of a quotient norm.
pub fn quotient_norm(q: &OperatorSpace, x: &ElementMatrix, cfg: &OptimizerConfig) -> Result<NormEstimate> {
    let (base, kernel, _) = parts(q);
    if let Some(p) = build_problem(q, x) {
        let (w, upper, lower) = descend(&p, cfg.value_tolerance, 0.0);
        return Ok(NormEstimate {
            lower,
            upper,
            witness: json!({ "method": "annihilator certificate", "kernelCoefficients": vec_to_json(&w) }),
            converged: upper - lower <= 1e-6 * upper.max(1.0),
        });
    }
    // generic base: random search over kernel coefficients for the upper
    // bound, trivial lower bound
    let n = x.level();
    let kdim = kernel.cols();
    let lifted = lift(q, x);
    let eval = |w: &[C64]| -> f64 {
        let mut y = lifted.clone();
        for i in 0..n {
            for j in 0..n {
                let off = (i * n + j) * kdim;
                let kv = kernel.mul_vec(&w[off..off + kdim]);
                for (d, s) in y.entry_mut(i, j).iter_mut().zip(kv) {
                    *d += s;
                }
            }
        }
        base.norm_upper(&y).unwrap_or(f64::INFINITY)
    };
    let mut upper = eval(&vec![ZERO; n * n * kdim]);
    if kdim > 0 && upper.is_finite() {
        let radius = 2.0 * upper;
        let ball = ProductBall::single(BlockBall::Euclidean(n * n * kdim));
        let f = FnObjective(|w: &[C64]| {
            let s: Vec<C64> = w.iter().map(|z| z * radius).collect();
            -eval(&s)
        });
        let opt = maximize(&f, &ball, cfg, &[vec![ZERO; n * n * kdim]])?;
        upper = upper.min(-opt.value);
    }
    Ok(NormEstimate {
        lower: 0.0,
        upper,
        witness: json!({ "method": "lift search" }),
        converged: false,
    })
}
