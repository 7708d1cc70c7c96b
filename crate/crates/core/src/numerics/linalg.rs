//! Dense decompositions: one-sided Jacobi SVD, cyclic Jacobi for Hermitian
//! matrices, LU with partial pivoting and Gram-Schmidt QR.
//!
//! All routines are deterministic. Singular values and eigenvalues come out
//! sorted (descending / ascending) with ties broken by the original column
//! index.

use super::cmatrix::{c, vec_inner, vec_norm, CMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `a = u * diag(s) * v†`.
///
/// `u` is `m×k`, `v` is `n×k` with `k = min(m, n)`; both have orthonormal
/// columns (completed arbitrarily where singular values vanish).
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

pub fn svd(a: &CMatrix) -> Svd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Svd {
            u: CMatrix::zeros(m, 0),
            s: vec![],
            v: CMatrix::zeros(n, 0),
        };
    }
    if m < n {
        let t = svd_tall(&a.adjoint());
        return Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    svd_tall(a)
}

/// Hestenes one-sided Jacobi on a matrix with `rows >= cols`.
fn svd_tall(a: &CMatrix) -> Svd {
    let (m, n) = a.shape();
    // work on columns
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| a.col(j)).collect();
    let mut vcols: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = vec![ZERO; n];
            e[j] = ONE;
            e
        })
        .collect();
    let eps = f64::EPSILON;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = vec_inner(&cols[p], &cols[q]);
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                // q column with phase removed so that <a_p, a_q> is real.
                let ph = phase.conj();
                for i in 0..m {
                    let ap = cols[p][i];
                    let aq = cols[q][i] * ph;
                    cols[p][i] = ap * cs - aq * sn;
                    cols[q][i] = ap * sn + aq * cs;
                }
                for i in 0..n {
                    let vp = vcols[p][i];
                    let vq = vcols[q][i] * ph;
                    vcols[p][i] = vp * cs - vq * sn;
                    vcols[q][i] = vp * sn + vq * cs;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = cols.iter().enumerate().map(|(j, c)| (vec_norm(c), j)).collect();
    // stable sort keeps original index order among ties
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let smax = order.first().map_or(0.0, |o| o.0);
    let mut ucols: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut vsorted: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &(sigma, j)) in order.iter().enumerate() {
        s.push(sigma);
        vsorted.push(vcols[j].clone());
        if sigma > smax * 1e-300_f64.max(f64::MIN_POSITIVE) && sigma > 0.0 {
            ucols.push(cols[j].iter().map(|z| z / sigma).collect());
        } else {
            ucols.push(vec![ZERO; m]);
            missing.push(k);
        }
    }
    complete_orthonormal(&mut ucols, &missing, m);
    let u = CMatrix::from_fn(m, n, |i, k| ucols[k][i]);
    let v = CMatrix::from_fn(n, n, |i, k| vsorted[k][i]);
    Svd { u, s, v }
}

/// Fill the columns listed in `missing` with unit vectors orthogonal to all
/// other columns.
fn complete_orthonormal(cols: &mut [Vec<C64>], missing: &[usize], dim: usize) {
    if missing.is_empty() {
        return;
    }
    let mut candidate = 0;
    for &k in missing {
        loop {
            assert!(candidate < dim, "cannot complete orthonormal set");
            let mut e = vec![ZERO; dim];
            e[candidate] = ONE;
            candidate += 1;
            for _ in 0..2 {
                for (j, col) in cols.iter().enumerate() {
                    if j == k || (missing.contains(&j) && vec_norm(col) == 0.0) {
                        continue;
                    }
                    let proj = vec_inner(col, &e);
                    for (x, y) in e.iter_mut().zip(col) {
                        *x -= proj * y;
                    }
                }
            }
            let nrm = vec_norm(&e);
            if nrm > 1e-8 {
                cols[k] = e.iter().map(|z| z / nrm).collect();
                break;
            }
        }
    }
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    svd(a).s
}

/// Largest singular value; 0 for empty matrices.
pub fn operator_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    // Rank-one and tiny cases are common in witnesses; the Jacobi sweep is
    // cheap enough that no special path is needed.
    svd(a).s.first().copied().unwrap_or(0.0)
}

/// Sum of singular values.
pub fn trace_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    svd(a).s.iter().sum()
}

/// Top singular triple `(sigma, u, v)` with `a v = sigma u`.
pub fn top_singular(a: &CMatrix) -> (f64, Vec<C64>, Vec<C64>) {
    let d = svd(a);
    if d.s.is_empty() {
        return (0.0, vec![ZERO; a.rows()], vec![ZERO; a.cols()]);
    }
    (d.s[0], d.u.col(0), d.v.col(0))
}

/// `u v†` built from a full SVD; the maximizer of `Re tr(g† x)` over the
/// operator-norm unit ball.
pub fn polar_factor(g: &CMatrix) -> CMatrix {
    let d = svd(g);
    &d.u * &d.v.adjoint()
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues ascending, with
/// eigenvectors as the columns of the returned matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(h: &CMatrix) -> HermitianEigen {
    assert!(h.is_square(), "eigen-decomposition needs a square matrix");
    let n = h.rows();
    let mut a = h.hermitian_part();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-16 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g <= 1e-300 {
                    continue;
                }
                let phase = apq / g;
                let zeta = (a[(q, q)].re - a[(p, p)].re) / (2.0 * g);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                // R = [[c, s e^{iφ}], [-s e^{-iφ}, c]] on coordinates (p, q)
                let rpp = c(cs, 0.0);
                let rpq = phase * sn;
                let rqp = -phase.conj() * sn;
                let rqq = c(cs, 0.0);
                // A <- A R
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * rpp + aiq * rqp;
                    a[(i, q)] = aip * rpq + aiq * rqq;
                }
                // A <- R† A
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = rpp.conj() * apj + rqp.conj() * aqj;
                    a[(q, j)] = rpq.conj() * apj + rqq.conj() * aqj;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * rpp + viq * rqp;
                    v[(i, q)] = vip * rpq + viq * rqq;
                }
            }
        }
    }
    let mut order: Vec<(f64, usize)> = (0..n).map(|i| (a[(i, i)].re, i)).collect();
    order.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|o| o.0).collect();
    let vectors = CMatrix::from_fn(n, n, |i, k| v[(i, order[k].1)]);
    HermitianEigen { values, vectors }
}

/// `‖h − h†‖` relative to `‖h‖` (Frobenius).
pub fn hermiticity_defect(h: &CMatrix) -> f64 {
    let diff = h - &h.adjoint();
    diff.frobenius_norm()
}

/// Smallest eigenvalue of the Hermitian part of `h`.
///
/// Fails with [`Error::NotHermitian`] when `‖h − h†‖ > 1e-10 · ‖h‖`.
pub fn min_eigenvalue(h: &CMatrix) -> Result<f64> {
    if !h.is_square() {
        return Err(Error::Dimension("min_eigenvalue needs a square matrix".into()));
    }
    if h.is_empty() {
        return Ok(0.0);
    }
    let dev = hermiticity_defect(h);
    if dev > 1e-10 * h.frobenius_norm().max(1e-300) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(hermitian_eigen(h).values[0])
}

/// Inverse via LU with partial pivoting.
pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::Dimension("inverse needs a square matrix".into()));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut inv = CMatrix::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|i| (i, m[(i, col)].norm()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= 1e-14 * scale {
            return Err(Error::Singular);
        }
        if piv != col {
            for j in 0..n {
                let t = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = t;
                let t = inv[(col, j)];
                inv[(col, j)] = inv[(piv, j)];
                inv[(piv, j)] = t;
            }
        }
        let d = m[(col, col)];
        for j in 0..n {
            m[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = m[(i, col)];
            if f == ZERO {
                continue;
            }
            for j in 0..n {
                let mc = m[(col, j)];
                let ic = inv[(col, j)];
                m[(i, j)] -= f * mc;
                inv[(i, j)] -= f * ic;
            }
        }
    }
    Ok(inv)
}

/// Orthonormalize the columns of `a` (modified Gram-Schmidt, two passes).
/// Returns `(q, r)` with `a = q r` and the diagonal of `r` real nonnegative.
pub fn qr(a: &CMatrix) -> (CMatrix, CMatrix) {
    let (m, n) = a.shape();
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut rmat = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut v = a.col(j);
        for _pass in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let proj = vec_inner(qk, &v);
                rmat[(k, j)] += proj;
                for (x, y) in v.iter_mut().zip(qk) {
                    *x -= proj * y;
                }
            }
        }
        let nrm = vec_norm(&v);
        rmat[(j, j)] = c(nrm, 0.0);
        if nrm > 0.0 {
            q.push(v.iter().map(|z| z / nrm).collect());
        } else {
            q.push(vec![ZERO; m]);
        }
    }
    let qm = CMatrix::from_fn(m, n, |i, k| q[k][i]);
    (qm, rmat)
}

/// Orthonormal basis (as columns) of the null space of `a`, using the
/// threshold `rel_tol · σ_max` on singular values.
pub fn null_space(a: &CMatrix, rel_tol: f64) -> CMatrix {
    let (m, n) = a.shape();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let padded = if m < n {
        let mut p = CMatrix::zeros(n, n);
        p.set_block(0, 0, a);
        p
    } else {
        a.clone()
    };
    let d = svd(&padded);
    let smax = d.s.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..n).filter(|&k| d.s[k] <= rel_tol * smax || smax == 0.0).collect();
    CMatrix::from_fn(n, keep.len(), |i, k| d.v[(i, keep[k])])
}

/// Orthonormal basis (as columns) of the range of `a`.
pub fn range_basis(a: &CMatrix, rel_tol: f64) -> CMatrix {
    let d = svd(a);
    let smax = d.s.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..d.s.len()).filter(|&k| smax > 0.0 && d.s[k] > rel_tol * smax).collect();
    CMatrix::from_fn(a.rows(), keep.len(), |i, k| d.u[(i, keep[k])])
}

/// Numerical rank with threshold `rel_tol · σ_max`.
pub fn rank(a: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(a);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Least-squares solution of `a x = b` through the pseudo-inverse.
pub fn solve_least_squares(a: &CMatrix, b: &[C64], rel_tol: f64) -> Vec<C64> {
    let d = svd(a);
    let smax = d.s.first().copied().unwrap_or(0.0);
    let utb: Vec<C64> = (0..d.s.len())
        .map(|k| (0..a.rows()).map(|i| d.u[(i, k)].conj() * b[i]).sum())
        .collect();
    let mut x = vec![ZERO; a.cols()];
    for k in 0..d.s.len() {
        if smax == 0.0 || d.s[k] <= rel_tol * smax {
            continue;
        }
        let coef = utb[k] / d.s[k];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += d.v[(i, k)] * coef;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cmatrix::{c, kron, r};
    use crate::numerics::random::{gaussian_matrix, rng_for};

    #[test]
    fn operator_norm_examples() {
        let nil = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!((operator_norm(&nil) - 1.0).abs() < 1e-12);
        assert!((operator_norm(&CMatrix::identity(3)) - 1.0).abs() < 1e-12);
        let d = CMatrix::from_real_rows(&[&[3.0, 0.0], &[0.0, -4.0]]);
        assert!((operator_norm(&d) - 4.0).abs() < 1e-12);
        assert_eq!(operator_norm(&CMatrix::zeros(0, 0)), 0.0);
    }

    #[test]
    fn trace_norm_examples() {
        assert!((trace_norm(&CMatrix::diag_real(&[1.0, -2.0])) - 3.0).abs() < 1e-12);
        assert!((trace_norm(&CMatrix::identity(2)) - 2.0).abs() < 1e-12);
        let nil = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!((trace_norm(&nil) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_reconstructs() {
        let mut rng = rng_for(7, 0);
        for &(m, n) in &[(3, 3), (4, 2), (2, 5), (6, 6)] {
            let a = gaussian_matrix(&mut rng, m, n);
            let d = svd(&a);
            let k = d.s.len();
            let sig = CMatrix::diag_real(&d.s);
            let rec = &(&d.u * &sig) * &d.v.adjoint();
            assert!(rec.approx_eq(&a, 1e-12), "{m}x{n}");
            assert!((&d.u.adjoint() * &d.u).approx_eq(&CMatrix::identity(k), 1e-12));
            assert!((&d.v.adjoint() * &d.v).approx_eq(&CMatrix::identity(k), 1e-12));
            assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_handles_rank_deficiency() {
        let u = vec![c(1.0, 0.5), c(-0.3, 0.0), c(0.0, 2.0)];
        let v = vec![c(0.2, 0.0), c(1.0, -1.0), c(0.0, 0.0)];
        let a = CMatrix::outer(&u, &v);
        let d = svd(&a);
        assert!((d.s[0] - vec_norm(&u) * vec_norm(&v)).abs() < 1e-12);
        assert!(d.s[1].abs() < 1e-12 && d.s[2].abs() < 1e-12);
        assert!((&d.u.adjoint() * &d.u).approx_eq(&CMatrix::identity(3), 1e-12));
    }

    #[test]
    fn eigen_of_swap_and_projectors() {
        assert!((min_eigenvalue(&CMatrix::diag_real(&[1.0, 2.0])).unwrap() - 1.0).abs() < 1e-14);
        assert!((min_eigenvalue(&CMatrix::diag_real(&[1.0, -1.0])).unwrap() + 1.0).abs() < 1e-14);
        // SWAP on C^2 ⊗ C^2
        let swap = CMatrix::from_fn(4, 4, |i, j| {
            let (a, b) = (i / 2, i % 2);
            let (c2, d) = (j / 2, j % 2);
            if a == d && b == c2 {
                ONE
            } else {
                ZERO
            }
        });
        let e = hermitian_eigen(&swap);
        let expect = [-1.0, 1.0, 1.0, 1.0];
        for (x, y) in e.values.iter().zip(expect) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        let mut rng = rng_for(11, 3);
        let g = gaussian_matrix(&mut rng, 5, 5);
        let h = (&g + &g.adjoint()).scale_real(0.5);
        let e = hermitian_eigen(&h);
        let rec = &(&e.vectors * &CMatrix::diag_real(&e.values)) * &e.vectors.adjoint();
        assert!(rec.approx_eq(&h, 1e-12));
    }

    #[test]
    fn non_hermitian_rejected() {
        let a = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(min_eigenvalue(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn inverse_roundtrip() {
        let mut rng = rng_for(5, 1);
        let a = gaussian_matrix(&mut rng, 4, 4);
        let inv = inverse(&a).unwrap();
        assert!((&a * &inv).approx_eq(&CMatrix::identity(4), 1e-11));
        assert!(matches!(inverse(&CMatrix::zeros(2, 2)), Err(Error::Singular)));
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = CMatrix::from_real_rows(&[&[1.0, 1.0, 0.0]]);
        let ns = null_space(&a, 1e-10);
        assert_eq!(ns.cols(), 2);
        assert!((&a * &ns).max_abs() < 1e-12);
        assert_eq!(rank(&kron(&a, &a), 1e-10), 1);
    }

    #[test]
    fn polar_factor_is_unitary_for_invertible() {
        let g = CMatrix::from_rows(&[&[r(2.0), c(0.0, 1.0)], &[r(0.5), r(-1.0)]]);
        let p = polar_factor(&g);
        assert!((&p.adjoint() * &p).approx_eq(&CMatrix::identity(2), 1e-12));
        // Re tr(g† p) equals the trace norm
        assert!(((g.inner(&p)).re - trace_norm(&g)).abs() < 1e-12);
    }
}
