//! Matrices `[x_ij] ∈ M_n(X)` stored as coordinate vectors over a basis of X.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::{kron, CMatrix, C64, ZERO};

/// An `n × n` matrix of elements of an `m`-dimensional space. Entry `(i, j)`
/// occupies `coords[(i*n + j)*m ..][..m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementMatrix {
    level: usize,
    dim: usize,
    coords: Vec<C64>,
}

impl ElementMatrix {
    pub fn new(level: usize, dim: usize, coords: Vec<C64>) -> Result<Self> {
        if coords.len() != level * level * dim {
            return Err(Error::Dimension(format!(
                "level {level} element of a {dim}-dimensional space needs {} coordinates, got {}",
                level * level * dim,
                coords.len()
            )));
        }
        if coords.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { level, dim, coords })
    }

    pub fn zeros(level: usize, dim: usize) -> Self {
        Self {
            level,
            dim,
            coords: vec![ZERO; level * level * dim],
        }
    }

    /// Level-1 element with the given coordinates.
    pub fn single(v: &[C64]) -> Self {
        Self {
            level: 1,
            dim: v.len(),
            coords: v.to_vec(),
        }
    }

    pub fn from_entries(level: usize, dim: usize, mut f: impl FnMut(usize, usize) -> Vec<C64>) -> Self {
        let mut coords = Vec::with_capacity(level * level * dim);
        for i in 0..level {
            for j in 0..level {
                let e = f(i, j);
                assert_eq!(e.len(), dim, "entry has wrong length");
                coords.extend(e);
            }
        }
        Self { level, dim, coords }
    }

    /// `x ⊗ v`: the scalar matrix `a` with every entry scaled onto `v`.
    pub fn scalar_times(a: &CMatrix, v: &[C64]) -> Self {
        assert!(a.is_square());
        Self::from_entries(a.rows(), v.len(), |i, j| v.iter().map(|z| z * a[(i, j)]).collect())
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    pub fn entry(&self, i: usize, j: usize) -> &[C64] {
        let start = (i * self.level + j) * self.dim;
        &self.coords[start..start + self.dim]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut [C64] {
        let start = (i * self.level + j) * self.dim;
        &mut self.coords[start..start + self.dim]
    }

    /// The scalar matrix `[x_ij[c]]` of coordinate `c`.
    pub fn coordinate_matrix(&self, c: usize) -> CMatrix {
        CMatrix::from_fn(self.level, self.level, |i, j| self.entry(i, j)[c])
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|z| *z == ZERO)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            level: self.level,
            dim: self.dim,
            coords: self.coords.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            level: self.level,
            dim: self.dim,
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.level != other.level || self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "element shapes differ: level {} dim {} vs level {} dim {}",
                self.level, self.dim, other.level, other.dim
            )));
        }
        Ok(())
    }

    /// Block-diagonal `x ⊕ y`.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension("direct sum of elements of different spaces".into()));
        }
        let (n, m) = (self.level, other.level);
        let zero = vec![ZERO; self.dim];
        Ok(Self::from_entries(n + m, self.dim, |i, j| {
            if i < n && j < n {
                self.entry(i, j).to_vec()
            } else if i >= n && j >= n {
                other.entry(i - n, j - n).to_vec()
            } else {
                zero.clone()
            }
        }))
    }

    /// `α x β` for scalar matrices `α: m×n`, `β: n×m`.
    pub fn sandwich(&self, alpha: &CMatrix, beta: &CMatrix) -> Result<Self> {
        let n = self.level;
        if alpha.cols() != n || beta.rows() != n || alpha.rows() != beta.cols() {
            return Err(Error::Dimension("scalar matrices do not match the element level".into()));
        }
        let m = alpha.rows();
        let mut out = Self::zeros(m, self.dim);
        for i in 0..m {
            for j in 0..m {
                let dst = out.entry_mut(i, j);
                for k in 0..n {
                    let a = alpha[(i, k)];
                    if a == ZERO {
                        continue;
                    }
                    for l in 0..n {
                        let w = a * beta[(l, j)];
                        if w == ZERO {
                            continue;
                        }
                        for (d, s) in dst.iter_mut().zip(self.entry(k, l)) {
                            *d += w * s;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Embed into level `m ≥ n` by padding with zero blocks.
    pub fn padded(&self, m: usize) -> Self {
        assert!(m >= self.level);
        let zero = vec![ZERO; self.dim];
        Self::from_entries(m, self.dim, |i, j| {
            if i < self.level && j < self.level {
                self.entry(i, j).to_vec()
            } else {
                zero.clone()
            }
        })
    }

    /// Apply a linear map on coordinates (`coeffs: dim' × dim`) entrywise.
    pub fn map_coords(&self, coeffs: &CMatrix) -> Result<Self> {
        if coeffs.cols() != self.dim {
            return Err(Error::Dimension(format!(
                "coefficient matrix has {} columns, space has dimension {}",
                coeffs.cols(),
                self.dim
            )));
        }
        Ok(Self::from_entries(self.level, coeffs.rows(), |i, j| coeffs.mul_vec(self.entry(i, j))))
    }

    /// `Σ_c X_c ⊗ E_c` for images `E_c` of the basis vectors: the assembled
    /// matrix with block `(i, j)` equal to `Σ_c x_ij[c] E_c`.
    pub fn assemble(&self, images: &[CMatrix]) -> CMatrix {
        assert_eq!(images.len(), self.dim, "one image per basis vector");
        let (r, cc) = images.first().map_or((0, 0), |e| e.shape());
        let n = self.level;
        let mut out = CMatrix::zeros(n * r, n * cc);
        for i in 0..n {
            for j in 0..n {
                for (c, z) in self.entry(i, j).iter().enumerate() {
                    if *z == ZERO {
                        continue;
                    }
                    let e = &images[c];
                    for p in 0..r {
                        for q in 0..cc {
                            out[(i * r + p, j * cc + q)] += z * e[(p, q)];
                        }
                    }
                }
            }
        }
        out
    }

    /// Same as [`assemble`](Self::assemble) via Kronecker products; kept for
    /// cross-checking the index convention.
    pub fn assemble_kron(&self, images: &[CMatrix]) -> CMatrix {
        let (r, cc) = images.first().map_or((0, 0), |e| e.shape());
        let mut out = CMatrix::zeros(self.level * r, self.level * cc);
        for (c, e) in images.iter().enumerate() {
            out += &kron(&self.coordinate_matrix(c), e);
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct ElementRepr {
    level: usize,
    coords: Vec<Vec<[f64; 2]>>,
}

impl Serialize for ElementMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let coords = (0..self.level * self.level)
            .map(|k| {
                self.coords[k * self.dim..(k + 1) * self.dim]
                    .iter()
                    .map(|z| [z.re, z.im])
                    .collect()
            })
            .collect();
        ElementRepr {
            level: self.level,
            coords,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ElementMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ElementRepr::deserialize(d)?;
        if r.coords.len() != r.level * r.level {
            return Err(D::Error::custom(format!(
                "level {} needs {} entries, got {}",
                r.level,
                r.level * r.level,
                r.coords.len()
            )));
        }
        let dim = r.coords.first().map_or(0, |v| v.len());
        if r.coords.iter().any(|v| v.len() != dim) {
            return Err(D::Error::custom("entries have different lengths"));
        }
        let flat = r.coords.iter().flatten().map(|p| C64::new(p[0], p[1])).collect();
        ElementMatrix::new(r.level, dim, flat).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::c;

    fn sample() -> ElementMatrix {
        ElementMatrix::from_entries(2, 2, |i, j| vec![c(i as f64, 1.0), c(j as f64, -0.5)])
    }

    #[test]
    fn assemble_matches_kron_convention() {
        let x = sample();
        let imgs = vec![
            CMatrix::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]),
            CMatrix::from_real_rows(&[&[0.0, 1.0], &[3.0, 0.0]]),
        ];
        assert!(x.assemble(&imgs).approx_eq(&x.assemble_kron(&imgs), 1e-14));
    }

    #[test]
    fn direct_sum_and_padding_agree() {
        let x = sample();
        let z = ElementMatrix::zeros(1, 2);
        assert_eq!(x.direct_sum(&z).unwrap(), x.padded(3));
    }

    #[test]
    fn json_roundtrip() {
        let x = sample();
        let s = serde_json::to_string(&x).unwrap();
        let back: ElementMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(x, back);
        assert!(serde_json::from_str::<ElementMatrix>(r#"{"level":2,"coords":[[[1,0]]]}"#).is_err());
    }

    #[test]
    fn sandwich_by_identity_is_noop() {
        let x = sample();
        let id = CMatrix::identity(2);
        assert_eq!(x.sandwich(&id, &id).unwrap(), x);
    }
}
