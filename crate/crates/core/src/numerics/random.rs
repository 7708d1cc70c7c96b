//! Seeded sampling helpers. Every stream is a ChaCha8 generator addressed by
//! `(seed, stream)`, so independent consumers never share state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::cmatrix::{c, CMatrix, C64};
use super::linalg::{operator_norm, qr};

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-distributed unitary (QR of a Gaussian matrix with phase fix).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    random_isometry(rng, n, n)
}

/// `rows × cols` matrix with orthonormal columns (`rows >= cols`).
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = gaussian_matrix(rng, rows, cols);
    let (q, _) = qr(&g);
    q
}

/// Random matrix with operator norm exactly `radius` (scaled Gaussian).
pub fn random_contraction<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, radius: f64) -> CMatrix {
    let g = gaussian_matrix(rng, rows, cols);
    let n = operator_norm(&g);
    if n == 0.0 {
        return g;
    }
    g.scale_real(radius / n)
}

pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let v = gaussian_vec(rng, d);
    let n = super::cmatrix::vec_norm(&v);
    let v: Vec<C64> = v.iter().map(|z| z / n).collect();
    CMatrix::outer(&v, &v)
}

/// Random full-rank density matrix `g g† / tr(g g†)`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let g = gaussian_matrix(rng, d, d);
    let p = &g * &g.adjoint();
    let t = p.trace().re;
    p.scale_real(1.0 / t)
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = gaussian_vec(&mut rng_for(3, 1), 4);
        let b = gaussian_vec(&mut rng_for(3, 1), 4);
        let other = gaussian_vec(&mut rng_for(3, 2), 4);
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn unitary_is_unitary() {
        let u = random_unitary(&mut rng_for(1, 0), 4);
        assert!((&u.adjoint() * &u).approx_eq(&CMatrix::identity(4), 1e-12));
    }

    #[test]
    fn density_has_unit_trace() {
        let rho = random_density(&mut rng_for(9, 0), 3);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        assert!(crate::numerics::linalg::min_eigenvalue(&rho).unwrap() > -1e-12);
    }
}
