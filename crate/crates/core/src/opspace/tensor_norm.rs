//! Projective tensor norm bounds, shared by the `ProjTensor` space kind and
//! the tensor module.
//!
//! Upper bounds: every split `n = p·q` of the level turns `u` into a sum of
//! rank-one terms `x^k ⊙ y^k` by an SVD, and
//! `‖u‖ ≤ Σ_k ‖x^k‖_p ‖y^k‖_q`. For two trace classes the norm is that of
//! the assembled trace-class element (the identification
//! `T_a ⊗^ T_b = T_ab` is completely isometric).
//!
//! Lower bounds: tensor products `φ ⊗ ψ` and products `φ(x)ψ(y)`,
//! `ψ(y)φ(x)` of complete contractions are complete contractions on the
//! projective tensor product.

use std::sync::Arc;

use super::element::ElementMatrix;
use super::oracle::{kron_images, CcFamily, ImageFn};
use super::space::{trace_class, OperatorSpace};
use crate::error::Result;
use crate::numerics::linalg::svd;
use crate::numerics::{CMatrix, C64, ONE};

/// An upper bound together with the split that produced it.
#[derive(Clone, Debug)]
pub struct ProjectiveUpper {
    pub value: f64,
    /// `(p, q)` of the best split, `(0, 0)` for the trace-class identification.
    pub split: (usize, usize),
}

/// Index of `e_{p1 q1} ⊗ e_{r1 s1}` in `T_ab`: the matrix unit
/// `e_{(p1·b + r1), (q1·b + s1)}`.
pub fn trace_pair_index(a: usize, b: usize, c: usize, e: usize) -> usize {
    let (p1, q1) = (c / a, c % a);
    let (r1, s1) = (e / b, e % b);
    (p1 * b + r1) * (a * b) + (q1 * b + s1)
}

/// Coordinate permutation `T_a ⊗ T_b → T_ab` (`a²b² × a²b²`).
pub fn trace_pair_matrix(a: usize, b: usize) -> CMatrix {
    let (da, db) = (a * a, b * b);
    let mut m = CMatrix::zeros(da * db, da * db);
    for c in 0..da {
        for e in 0..db {
            m[(trace_pair_index(a, b, c, e), c * db + e)] = ONE;
        }
    }
    m
}

/// `x^k ⊙ y^k` terms of the split `n = p·q`, with the singular value folded
/// into `x^k`.
pub fn rank_one_terms(u: &ElementMatrix, dx: usize, dy: usize, p: usize, q: usize) -> Vec<(ElementMatrix, ElementMatrix)> {
    let n = u.level();
    debug_assert_eq!(p * q, n);
    // row (i1, j1, c), column (i2, j2, e); i = i1·q + i2
    let rows = p * p * dx;
    let cols = q * q * dy;
    let mut m = CMatrix::zeros(rows, cols);
    for i1 in 0..p {
        for i2 in 0..q {
            for j1 in 0..p {
                for j2 in 0..q {
                    let ent = u.entry(i1 * q + i2, j1 * q + j2);
                    for c in 0..dx {
                        for e in 0..dy {
                            m[((i1 * p + j1) * dx + c, (i2 * q + j2) * dy + e)] = ent[c * dy + e];
                        }
                    }
                }
            }
        }
    }
    let d = svd(&m);
    let mut out = Vec::new();
    for k in 0..d.s.len() {
        if d.s[k] <= 1e-300 {
            continue;
        }
        let xv: Vec<C64> = (0..rows).map(|t| d.u[(t, k)] * d.s[k]).collect();
        let yv: Vec<C64> = (0..cols).map(|t| d.v[(t, k)].conj()).collect();
        out.push((
            ElementMatrix::new(p, dx, xv).expect("shape"),
            ElementMatrix::new(q, dy, yv).expect("shape"),
        ));
    }
    out
}

/// `x ⊙ y = [x_ij ⊗ y_kl]_{(i,k),(j,l)}`.
pub fn odot(x: &ElementMatrix, y: &ElementMatrix) -> ElementMatrix {
    let (p, q) = (x.level(), y.level());
    let (dx, dy) = (x.dim(), y.dim());
    ElementMatrix::from_entries(p * q, dx * dy, |r, s| {
        let (i, k) = (r / q, r % q);
        let (j, l) = (s / q, s % q);
        let a = x.entry(i, j);
        let b = y.entry(k, l);
        let mut v = Vec::with_capacity(dx * dy);
        for ac in a {
            for bc in b {
                v.push(ac * bc);
            }
        }
        v
    })
}

pub fn projective_upper(left: &OperatorSpace, right: &OperatorSpace, u: &ElementMatrix) -> Result<ProjectiveUpper> {
    let n = u.level();
    let (dx, dy) = (left.dim(), right.dim());
    let mut best = ProjectiveUpper {
        value: f64::INFINITY,
        split: (n, 1),
    };
    for p in (1..=n).filter(|p| n.is_multiple_of(*p)) {
        let q = n / p;
        let mut total = 0.0;
        for (x, y) in rank_one_terms(u, dx, dy, p, q) {
            total += left.norm_upper(&x)? * right.norm_upper(&y)?;
            if total >= best.value {
                break;
            }
        }
        if total < best.value {
            best = ProjectiveUpper { value: total, split: (p, q) };
        }
    }
    if let (Some(a), Some(b)) = (left.trace_class_order(), right.trace_class_order()) {
        let t = trace_class(a * b);
        let v = t.norm_upper(&u.map_coords(&trace_pair_matrix(a, b))?)?;
        if v < best.value {
            best = ProjectiveUpper { value: v, split: (0, 0) };
        }
    }
    Ok(best)
}

fn product_family(first: &CcFamily, second: &CcFamily, swap: bool, label: &str) -> CcFamily {
    let k = first.ball.dim();
    let f1 = first.images.clone();
    let f2 = second.images.clone();
    let ball = first.ball.clone().concat(second.ball.clone());
    let images: ImageFn = Arc::new(move |t| {
        let a = f1(&t[..k]);
        let b = f2(&t[k..]);
        let mut out = Vec::with_capacity(a.len() * b.len());
        for x in &a {
            for y in &b {
                out.push(if swap { y * x } else { x * y });
            }
        }
        out
    });
    CcFamily::new(ball, images, label)
}

/// Test families on `M_n(X ⊗^ Y)`.
pub fn projective_families(left: &OperatorSpace, right: &OperatorSpace, n: usize) -> Result<Vec<CcFamily>> {
    let mut out = Vec::new();
    let lf = left.families(n)?;
    let rf = right.families(n)?;
    for a in &lf {
        for b in &rf {
            let k = a.ball.dim();
            let (fa, fb) = (a.images.clone(), b.images.clone());
            out.push(CcFamily::new(
                a.ball.clone().concat(b.ball.clone()),
                Arc::new(move |t| kron_images(&fa(&t[..k]), &fb(&t[k..]))),
                format!("tensor({}, {})", a.label, b.label),
            ));
        }
    }
    if let (Some(sa), Some(sb)) = (left.square_family(n), right.square_family(n)) {
        out.push(product_family(&sa, &sb, false, "product"));
        out.push(product_family(&sa, &sb, true, "reversed product"));
    }
    if let (Some(a), Some(b)) = (left.trace_class_order(), right.trace_class_order()) {
        let perm = trace_pair_matrix(a, b);
        // E'_{(c,e)} = E_{t(c,e)}: pull back along the permutation
        for f in trace_class(a * b).families(n)? {
            out.push(f.pullback(&perm, "trace pairing"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::{gaussian_vec, rng_for};
    use crate::numerics::{operator_norm, trace_norm, OptimizerConfig};
    use crate::opspace::space::*;

    #[test]
    fn rank_one_terms_reassemble() {
        let mut rng = rng_for(3, 0);
        let u = ElementMatrix::new(2, 4 * 3, gaussian_vec(&mut rng, 4 * 12)).unwrap();
        for (p, q) in [(1, 2), (2, 1)] {
            let terms = rank_one_terms(&u, 4, 3, p, q);
            let mut acc = ElementMatrix::zeros(2, 12);
            for (x, y) in &terms {
                acc = acc.add(&odot(x, y)).unwrap();
            }
            let diff = acc.sub(&u).unwrap();
            assert!(diff.coords().iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn trace_pair_index_is_a_permutation() {
        let m = trace_pair_matrix(2, 3);
        let id = &m * &m.adjoint();
        assert!(id.approx_eq(&CMatrix::identity(36), 0.0));
    }

    #[test]
    fn trace_class_tensor_level_one() {
        let t = proj_tensor(trace_class(2), trace_class(2));
        let mut rng = rng_for(9, 0);
        let u = ElementMatrix::new(1, 16, gaussian_vec(&mut rng, 16)).unwrap();
        let est = t.norm(&u, &OptimizerConfig::with_seed(4).restarts(4)).unwrap();
        let v = u.map_coords(&trace_pair_matrix(2, 2)).unwrap();
        let tn = trace_norm(&CMatrix::from_vec(4, 4, v.coords().to_vec()).unwrap());
        assert!(est.lower <= tn + 1e-9 && est.upper >= tn - 1e-9);
        assert!(est.gap() < 1e-6 * tn, "{est:?}");
    }

    #[test]
    fn elementary_tensor_in_matrices() {
        let m2 = matrix_space(2);
        let t = proj_tensor(m2.clone(), m2);
        let mut rng = rng_for(11, 0);
        let x = gaussian_vec(&mut rng, 4);
        let y = gaussian_vec(&mut rng, 4);
        let u = odot(&ElementMatrix::single(&x), &ElementMatrix::single(&y));
        let est = t.norm(&u, &OptimizerConfig::with_seed(1).restarts(2)).unwrap();
        let nx = operator_norm(&CMatrix::from_vec(2, 2, x).unwrap());
        let ny = operator_norm(&CMatrix::from_vec(2, 2, y).unwrap());
        assert!((est.lower - nx * ny).abs() < 1e-9 && (est.upper - nx * ny).abs() < 1e-9);
    }
}
