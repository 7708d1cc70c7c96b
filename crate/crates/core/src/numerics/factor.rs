//! Balanced row/column factorizations.
//!
//! A family of terms `(A_t, B_t)` represents the map `b ↦ Σ_t A_t b B_t`
//! (or the tensor `Σ_t A_t ⊗ B_t`). For any gauge `G ∈ GL_R` acting on the
//! term index, `‖row(A G)‖ · ‖col(G⁻¹ B)‖` bounds the completely bounded
//! (resp. Haagerup) norm from above. Writing `P = G G†` the squared factors
//! are `λmax(Â (P⊗1) Â†)` and `λmax(B̂† (P⁻¹⊗1) B̂)`, whose sum is convex in
//! `P`. We minimize a log-sum-exp smoothing of that sum by geodesic descent
//! on the positive cone and keep the best exact product seen, so the result
//! is always a valid upper bound.

use super::cmatrix::{CMatrix, C64, ZERO};
use super::linalg::{hermitian_eigen, svd};

/// Terms `(A_t, B_t)` with all `A_t` of one shape and all `B_t` of one shape.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub left: Vec<CMatrix>,
    pub right: Vec<CMatrix>,
}

#[derive(Clone, Debug)]
pub struct BalancedBound {
    /// Best certified value `‖row‖·‖col‖`.
    pub value: f64,
    /// Gauge `P = G G†` attaining it.
    pub gauge: CMatrix,
    /// Value of the ungauged input.
    pub initial: f64,
}

impl Factorization {
    pub fn new(left: Vec<CMatrix>, right: Vec<CMatrix>) -> Self {
        assert_eq!(left.len(), right.len(), "term counts differ");
        Self { left, right }
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    /// `‖Σ A_t A_t†‖^{1/2}`.
    pub fn row_norm(&self) -> f64 {
        let Some(first) = self.left.first() else { return 0.0 };
        let mut m = CMatrix::zeros(first.rows(), first.rows());
        for a in &self.left {
            m += &(a * &a.adjoint());
        }
        lambda_max(&m).max(0.0).sqrt()
    }

    /// `‖Σ B_t† B_t‖^{1/2}`.
    pub fn col_norm(&self) -> f64 {
        let Some(first) = self.right.first() else { return 0.0 };
        let mut m = CMatrix::zeros(first.cols(), first.cols());
        for b in &self.right {
            m += &(&b.adjoint() * b);
        }
        lambda_max(&m).max(0.0).sqrt()
    }

    pub fn cost(&self) -> f64 {
        self.row_norm() * self.col_norm()
    }

    /// Evaluate `Σ_t A_t x B_t`.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let mut out: Option<CMatrix> = None;
        for (a, b) in self.left.iter().zip(&self.right) {
            let term = &(a * x) * b;
            out = Some(match out {
                None => term,
                Some(acc) => acc + term,
            });
        }
        out.unwrap_or_else(|| CMatrix::zeros(0, 0))
    }

    /// Terms after applying the gauge `G` (left) and `G⁻¹` (right).
    pub fn gauged(&self, g: &CMatrix, g_inv: &CMatrix) -> Factorization {
        let r = self.len();
        let left = (0..r)
            .map(|s| {
                let mut acc = CMatrix::zeros(self.left[0].rows(), self.left[0].cols());
                for t in 0..r {
                    if g[(t, s)] != ZERO {
                        acc.add_scaled(g[(t, s)], &self.left[t]);
                    }
                }
                acc
            })
            .collect();
        let right = (0..r)
            .map(|s| {
                let mut acc = CMatrix::zeros(self.right[0].rows(), self.right[0].cols());
                for t in 0..r {
                    if g_inv[(s, t)] != ZERO {
                        acc.add_scaled(g_inv[(s, t)], &self.right[t]);
                    }
                }
                acc
            })
            .collect();
        Factorization { left, right }
    }
}

fn lambda_max(h: &CMatrix) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    *hermitian_eigen(h).values.last().unwrap()
}

/// Apply `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(h: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let e = hermitian_eigen(h);
    let n = h.rows();
    let mut out = CMatrix::zeros(n, n);
    for k in 0..n {
        let fk = f(e.values[k]);
        for i in 0..n {
            let vik = e.vectors[(i, k)] * fk;
            for j in 0..n {
                out[(i, j)] += vik * e.vectors[(j, k)].conj();
            }
        }
    }
    out
}

/// Log-sum-exp smoothing of `λmax`: returns `(μ log Σ exp(λ_i/μ), ∇, λmax)`.
pub fn smooth_max(h: &CMatrix, mu: f64) -> (f64, CMatrix, f64) {
    let e = hermitian_eigen(h);
    let n = h.rows();
    let lmax = *e.values.last().unwrap();
    let weights: Vec<f64> = e.values.iter().map(|l| ((l - lmax) / mu).exp()).collect();
    let z: f64 = weights.iter().sum();
    let value = lmax + mu * z.ln();
    let mut w = CMatrix::zeros(n, n);
    for k in 0..n {
        let wk = weights[k] / z;
        if wk < 1e-300 {
            continue;
        }
        for i in 0..n {
            let vik = e.vectors[(i, k)] * wk;
            for j in 0..n {
                w[(i, j)] += vik * e.vectors[(j, k)].conj();
            }
        }
    }
    (value, w, lmax)
}

/// Partial trace over the inner factor of a `(R·k) × (R·k)` matrix.
fn partial_trace_inner(m: &CMatrix, r: usize, k: usize) -> CMatrix {
    CMatrix::from_fn(r, r, |s, t| (0..k).map(|a| m[(s * k + a, t * k + a)]).sum())
}

struct Stacked {
    /// `[A_1 … A_R]`
    a: CMatrix,
    /// `[B_1; …; B_R]`
    b: CMatrix,
    r: usize,
    ka: usize,
    kb: usize,
}

fn kron_identity_middle(a: &CMatrix, p: &CMatrix, k: usize, left: bool) -> CMatrix {
    // left: a (P⊗1_k) a†   (a is m × R·k)
    // right: a† (P⊗1_k) a  (a is R·k × m)
    let r = p.rows();
    if left {
        let m = a.rows();
        // a (P⊗1): column block s = Σ_t a_t P[t,s]
        let mut ap = CMatrix::zeros(m, r * k);
        for s in 0..r {
            for t in 0..r {
                let pts = p[(t, s)];
                if pts == ZERO {
                    continue;
                }
                for i in 0..m {
                    for al in 0..k {
                        ap[(i, s * k + al)] += a[(i, t * k + al)] * pts;
                    }
                }
            }
        }
        &ap * &a.adjoint()
    } else {
        let m = a.cols();
        let mut pa = CMatrix::zeros(r * k, m);
        for s in 0..r {
            for t in 0..r {
                let pst = p[(s, t)];
                if pst == ZERO {
                    continue;
                }
                for be in 0..k {
                    for j in 0..m {
                        pa[(s * k + be, j)] += pst * a[(t * k + be, j)];
                    }
                }
            }
        }
        &a.adjoint() * &pa
    }
}

struct Eval {
    h: f64,
    grad: CMatrix,
    exact: f64,
}

fn evaluate(st: &Stacked, p: &CMatrix, q: &CMatrix, mu: f64) -> Eval {
    let ma = kron_identity_middle(&st.a, p, st.ka, true);
    let mb = kron_identity_middle(&st.b, q, st.kb, false);
    let (sa, wa, la) = smooth_max(&ma, mu);
    let (sb, wb, lb) = smooth_max(&mb, mu);
    let da = partial_trace_inner(&(&(&st.a.adjoint() * &wa) * &st.a), st.r, st.ka);
    let db = partial_trace_inner(&(&(&st.b * &wb) * &st.b.adjoint()), st.r, st.kb);
    let grad = &da - &(&(q * &db) * q);
    Eval {
        h: sa + sb,
        grad,
        exact: (la.max(0.0) * lb.max(0.0)).sqrt(),
    }
}

fn project_block_scalar(x: &CMatrix, blocks: &[usize]) -> CMatrix {
    let mut out = CMatrix::zeros(x.rows(), x.cols());
    let mut off = 0;
    for &len in blocks {
        let mean: C64 = (off..off + len).map(|i| x[(i, i)]).sum::<C64>() / len as f64;
        for i in off..off + len {
            out[(i, i)] = C64::new(mean.re, 0.0);
        }
        off += len;
    }
    out
}

/// Minimize `‖row(A G)‖ · ‖col(G⁻¹ B)‖` over invertible gauges. With
/// `blocks`, the gauge is restricted to block-scalar matrices (one positive
/// weight per block of consecutive terms).
pub fn balance(f: &Factorization, blocks: Option<&[usize]>) -> BalancedBound {
    balance_until(f, blocks, 0.0)
}

/// [`balance`] that returns as soon as the bound reaches `stop_at`.
pub fn balance_until(f: &Factorization, blocks: Option<&[usize]>, stop_at: f64) -> BalancedBound {
    let r = f.len();
    let initial = f.cost();
    if r == 0 || initial == 0.0 {
        return BalancedBound {
            value: initial,
            gauge: CMatrix::identity(r),
            initial,
        };
    }
    let ka = f.left[0].cols();
    let kb = f.right[0].rows();
    let st = Stacked {
        a: CMatrix::hstack(&f.left),
        b: CMatrix::vstack(&f.right),
        r,
        ka,
        kb,
    };
    // Start from the scalar balance point.
    let row = f.row_norm();
    let col = f.col_norm();
    let scale = if row > 0.0 && col > 0.0 { col / row } else { 1.0 };
    let mut p = CMatrix::identity(r).scale_real(scale);
    let mut best = initial;
    let mut best_p = CMatrix::identity(r);
    let mut mu = 0.05 * initial;
    'phases: for _phase in 0..10 {
        for _it in 0..60 {
            if best <= stop_at {
                break 'phases;
            }
            let q = hermitian_fn(&p, |l| 1.0 / l);
            let ev = evaluate(&st, &p, &q, mu);
            if ev.exact < best {
                best = ev.exact;
                best_p = p.clone();
            }
            let s = hermitian_fn(&p, f64::sqrt);
            let mut x = &(&s * &ev.grad) * &s;
            x = x.hermitian_part();
            if let Some(b) = blocks {
                x = project_block_scalar(&x, b);
            }
            let xn = x.frobenius_norm();
            if xn < 1e-12 * ev.h.abs().max(1e-300) {
                break;
            }
            let spec = hermitian_eigen(&x);
            let xmax = spec.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let mut eta = 1.0 / xmax;
            let mut moved = false;
            for _ in 0..30 {
                let e = hermitian_fn(&x, |l| (-eta * l).exp());
                let cand = (&(&s * &e) * &s).hermitian_part();
                let cq = hermitian_fn(&cand, |l| 1.0 / l.max(1e-300));
                let ce = evaluate(&st, &cand, &cq, mu);
                if ce.exact < best {
                    best = ce.exact;
                    best_p = cand.clone();
                }
                if ce.h <= ev.h - 1e-4 * eta * xn * xn {
                    p = cand;
                    moved = true;
                    break;
                }
                eta *= 0.5;
            }
            if !moved {
                break;
            }
        }
        mu *= 0.3;
        if mu < 1e-9 * best {
            break;
        }
    }
    BalancedBound {
        value: best.min(initial),
        gauge: if best < initial { best_p } else { CMatrix::identity(r) },
        initial,
    }
}

/// Terms `(A_t, B_t)` with `Φ(b) = Σ_t A_t b B_t`, for the linear map whose
/// matrix `l` sends row-major `vec(b)` (`b` is `in_shape`) to row-major
/// `vec(Φ(b))` (`Φ(b)` is `out_shape`). The terms come from an SVD of the
/// realignment `Y[(i,p),(q,j)] = l[(i,j),(p,q)]`, so their number is minimal.
pub fn wittstock_terms(l: &CMatrix, out_shape: (usize, usize), in_shape: (usize, usize)) -> Factorization {
    let (ro, co) = out_shape;
    let (ri, ci) = in_shape;
    assert_eq!(l.rows(), ro * co);
    assert_eq!(l.cols(), ri * ci);
    let y = CMatrix::from_fn(ro * ri, ci * co, |row, col| {
        let (i, p) = (row / ri, row % ri);
        let (q, j) = (col / co, col % co);
        l[(i * co + j, p * ci + q)]
    });
    let d = svd(&y);
    let smax = d.s.first().copied().unwrap_or(0.0);
    let mut left = Vec::new();
    let mut right = Vec::new();
    for k in 0..d.s.len() {
        if smax == 0.0 || d.s[k] <= 1e-13 * smax {
            continue;
        }
        let rt = d.s[k].sqrt();
        left.push(CMatrix::from_fn(ro, ri, |i, p| d.u[(i * ri + p, k)] * rt));
        right.push(CMatrix::from_fn(ci, co, |q, j| d.v[(q * co + j, k)].conj() * rt));
    }
    Factorization::new(left, right)
}

/// Certified upper bound on the cb norm of the map `l` between full matrix
/// spaces (see [`wittstock_terms`] for the layout).
pub fn cb_upper(l: &CMatrix, out_shape: (usize, usize), in_shape: (usize, usize)) -> BalancedBound {
    balance(&wittstock_terms(l, out_shape, in_shape), None)
}

/// [`cb_upper`] that may stop once the bound reaches `stop_at`.
pub fn cb_upper_until(l: &CMatrix, out_shape: (usize, usize), in_shape: (usize, usize), stop_at: f64) -> BalancedBound {
    balance_until(&wittstock_terms(l, out_shape, in_shape), None, stop_at)
}

/// Upper bound from user-supplied terms combined with the minimal terms of
/// `l`; the smaller certified value wins.
pub fn cb_upper_seeded(
    l: &CMatrix,
    out_shape: (usize, usize),
    in_shape: (usize, usize),
    seed_terms: Option<&Factorization>,
) -> f64 {
    let mut best = cb_upper(l, out_shape, in_shape).value;
    if let Some(f) = seed_terms {
        best = best.min(balance(f, None).value);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cmatrix::ONE;
    use crate::numerics::random::{gaussian_matrix, random_unitary, rng_for};

    fn map_matrix(f: impl Fn(&CMatrix) -> CMatrix, out: (usize, usize), inp: (usize, usize)) -> CMatrix {
        let mut l = CMatrix::zeros(out.0 * out.1, inp.0 * inp.1);
        for p in 0..inp.0 {
            for q in 0..inp.1 {
                let img = f(&CMatrix::unit(inp.0, inp.1, p, q));
                for (idx, z) in img.data().iter().enumerate() {
                    l[(idx, p * inp.1 + q)] = *z;
                }
            }
        }
        l
    }

    #[test]
    fn transpose_has_cb_norm_dimension() {
        for k in 2..4 {
            let l = map_matrix(|b| b.transpose(), (k, k), (k, k));
            let b = cb_upper(&l, (k, k), (k, k));
            assert!((b.value - k as f64).abs() < 1e-9, "{}", b.value);
        }
    }

    #[test]
    fn terms_reproduce_the_map() {
        let mut rng = rng_for(2, 0);
        let a = gaussian_matrix(&mut rng, 2, 3);
        let bm = gaussian_matrix(&mut rng, 3, 2);
        let f = |x: &CMatrix| &(&a * x) * &bm + x.submatrix(0, 0, 2, 2).transpose();
        let l = map_matrix(f, (2, 2), (3, 3));
        let terms = wittstock_terms(&l, (2, 2), (3, 3));
        let x = gaussian_matrix(&mut rng, 3, 3);
        assert!(terms.apply(&x).approx_eq(&f(&x), 1e-12));
    }

    #[test]
    fn unitary_conjugation_is_completely_contractive() {
        let u = random_unitary(&mut rng_for(4, 0), 3);
        let l = map_matrix(|b| &(&u * b) * &u.adjoint(), (3, 3), (3, 3));
        let b = cb_upper(&l, (3, 3), (3, 3));
        assert!((b.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbalanced_terms_get_balanced() {
        // Φ(b) = (5 e00) b (0.2 e00) + ... has cb norm 1 after scaling.
        let a = CMatrix::identity(2).scale_real(5.0);
        let b = CMatrix::identity(2).scale_real(0.2);
        let f = Factorization::new(vec![a], vec![b]);
        assert!((f.cost() - 1.0).abs() < 1e-12);
        let skew = Factorization::new(
            vec![CMatrix::unit(2, 2, 0, 0).scale_real(4.0), CMatrix::unit(2, 2, 1, 1)],
            vec![CMatrix::unit(2, 2, 0, 0), CMatrix::unit(2, 2, 1, 1).scale_real(4.0)],
        );
        // b ↦ 4 b00 e00 + 4 b11 e11 : cb norm 4, naive cost 4·4
        assert!((skew.cost() - 16.0).abs() < 1e-12);
        let bb = balance(&skew, None);
        assert!((bb.value - 4.0).abs() < 1e-6, "{}", bb.value);
        let diag = balance(&skew, Some(&[1, 1]));
        assert!((diag.value - 4.0).abs() < 1e-6, "{}", diag.value);
    }

    #[test]
    fn smooth_max_dominates() {
        let h = CMatrix::diag_real(&[1.0, 0.5, -2.0]);
        let (v, w, l) = smooth_max(&h, 0.01);
        assert!(v >= l && (v - 1.0).abs() < 1e-6);
        assert!((w.trace() - ONE).norm() < 1e-12);
    }
}
