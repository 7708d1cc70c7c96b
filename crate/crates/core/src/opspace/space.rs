//! Operator space descriptions and their constructors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::json::cvec;
use crate::numerics::linalg::{hermitian_eigen, inverse, null_space, range_basis, rank, solve_least_squares};
use crate::numerics::{CMatrix, C64, ONE, ZERO};

/// A norm on `ℂ^m` given in closed form, used as the level-1 datum of the
/// min and max quantizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "norm", rename_all = "camelCase")]
pub enum BanachNorm {
    /// `|z|` on `ℂ`.
    Modulus,
    Euclidean { dim: usize },
    L1 { dim: usize },
    LInf { dim: usize },
    /// Operator norm of the row-major `rows × cols` matrix of coordinates.
    Operator { rows: usize, cols: usize },
    /// Trace norm of the row-major `rows × cols` matrix of coordinates.
    Trace { rows: usize, cols: usize },
    /// `x ↦ ‖T x‖` for an injective `T`.
    Pullback { inner: Box<BanachNorm>, map: CMatrix },
    /// The level-1 norm of an operator space.
    Level1 { space: Box<OperatorSpace> },
}

impl BanachNorm {
    pub fn dim(&self) -> usize {
        match self {
            BanachNorm::Modulus => 1,
            BanachNorm::Euclidean { dim } | BanachNorm::L1 { dim } | BanachNorm::LInf { dim } => *dim,
            BanachNorm::Operator { rows, cols } | BanachNorm::Trace { rows, cols } => rows * cols,
            BanachNorm::Pullback { map, .. } => map.cols(),
            BanachNorm::Level1 { space } => space.dim(),
        }
    }

    /// Reject seminorms and malformed data.
    pub fn validate(&self) -> Result<()> {
        match self {
            BanachNorm::Pullback { inner, map } => {
                inner.validate()?;
                if map.rows() != inner.dim() {
                    return Err(Error::Dimension("pullback map does not land in the inner space".into()));
                }
                if !map.is_finite() {
                    return Err(Error::NonFinite);
                }
                if rank(map, 1e-10) < map.cols() {
                    return Err(Error::NotANorm("pullback map has a nontrivial kernel".into()));
                }
                Ok(())
            }
            BanachNorm::Level1 { space } => {
                // a space built by the constructors always carries a norm;
                // spot-check the basis vectors anyway
                for c in 0..space.dim() {
                    let mut e = vec![ZERO; space.dim()];
                    e[c] = ONE;
                    if space.level1_upper(&e) <= 0.0 {
                        return Err(Error::NotANorm(format!("basis vector {c} has norm 0")));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Exact value where a closed form exists; `Level1` reports the space's
    /// cheap certified upper bound.
    pub fn norm(&self, x: &[C64]) -> f64 {
        use crate::numerics::{operator_norm, trace_norm};
        match self {
            BanachNorm::Modulus => x[0].norm(),
            BanachNorm::Euclidean { .. } => crate::numerics::cmatrix::vec_norm(x),
            BanachNorm::L1 { .. } => x.iter().map(|z| z.norm()).sum(),
            BanachNorm::LInf { .. } => x.iter().map(|z| z.norm()).fold(0.0, f64::max),
            BanachNorm::Operator { rows, cols } => {
                operator_norm(&CMatrix::from_vec(*rows, *cols, x.to_vec()).expect("shape"))
            }
            BanachNorm::Trace { rows, cols } => trace_norm(&CMatrix::from_vec(*rows, *cols, x.to_vec()).expect("shape")),
            BanachNorm::Pullback { inner, map } => inner.norm(&map.mul_vec(x)),
            BanachNorm::Level1 { space } => space.level1_upper(x),
        }
    }

    pub fn is_exact(&self) -> bool {
        match self {
            BanachNorm::Pullback { inner, .. } => inner.is_exact(),
            BanachNorm::Level1 { space } => space.is_exact(),
            _ => true,
        }
    }

    /// The dual norm under the bilinear pairing `⟨f, x⟩ = Σ f_c x_c`, when it
    /// has a closed form.
    pub fn dual(&self) -> Option<BanachNorm> {
        Some(match self {
            BanachNorm::Modulus => BanachNorm::Modulus,
            BanachNorm::Euclidean { dim } => BanachNorm::Euclidean { dim: *dim },
            BanachNorm::L1 { dim } => BanachNorm::LInf { dim: *dim },
            BanachNorm::LInf { dim } => BanachNorm::L1 { dim: *dim },
            BanachNorm::Operator { rows, cols } => BanachNorm::Trace { rows: *rows, cols: *cols },
            BanachNorm::Trace { rows, cols } => BanachNorm::Operator { rows: *rows, cols: *cols },
            BanachNorm::Pullback { .. } | BanachNorm::Level1 { .. } => return None,
        })
    }

    /// An operator space whose level-1 norm is this norm, on the same
    /// coordinates. It lies between the min and max quantizations.
    pub fn realization(&self) -> OperatorSpace {
        match self {
            BanachNorm::Modulus => matrix_space(1),
            BanachNorm::Euclidean { dim } => column_hilbert(*dim),
            BanachNorm::L1 { dim } => direct_sum_1(vec![matrix_space(1); *dim]),
            BanachNorm::LInf { dim } => OperatorSpace::Concrete {
                rows: *dim,
                cols: *dim,
                basis: (0..*dim).map(|i| CMatrix::unit(*dim, *dim, i, i)).collect(),
            },
            BanachNorm::Operator { rows, cols } => rect_matrix_space(*rows, *cols),
            BanachNorm::Trace { rows, cols } => OperatorSpace::Dual {
                base: Box::new(rect_matrix_space(*rows, *cols)),
                pairing: CMatrix::identity(rows * cols),
            },
            BanachNorm::Pullback { inner, map } => {
                subspace(inner.realization(), map).expect("validated pullback is injective")
            }
            BanachNorm::Level1 { space } => (**space).clone(),
        }
    }

    /// The closed-form norm agreeing with the level-1 norm of `space`, if one
    /// is recognized; otherwise `Level1`.
    pub fn level1_of(space: &OperatorSpace) -> BanachNorm {
        if let OperatorSpace::Concrete { rows, cols, .. } = space {
            if space.dim() > 0 && *space == rect_matrix_space(*rows, *cols) {
                return BanachNorm::Operator { rows: *rows, cols: *cols };
            }
        }
        if let Some(k) = space.trace_class_order() {
            // ⟨f, a⟩ = tr(F a) with F stored transposed; the trace norm is
            // transpose invariant
            return BanachNorm::Trace { rows: k, cols: k };
        }
        if let Some(d) = space.column_hilbert_dim() {
            return BanachNorm::Euclidean { dim: d };
        }
        BanachNorm::Level1 {
            space: Box::new(space.clone()),
        }
    }
}

/// A finite-dimensional operator space: a coordinate space `ℂ^m` with a
/// matrix norm on every level.
///
/// Coordinates: `SumInf`/`Sum1` concatenate the parts; `ProjTensor` puts
/// `e_c ⊗ e_e` at index `c·dimY + e`; `Quotient` uses coordinates `y` for
/// the class of `section · y`; `Subspace` uses `y` for `embedding · y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", try_from = "SpaceSpec")]
pub enum OperatorSpace {
    /// Span of linearly independent `rows × cols` matrices with the operator
    /// norm on every level.
    Concrete { rows: usize, cols: usize, basis: Vec<CMatrix> },
    /// Dual of `base` under `⟨f, a⟩ = fᵀ · pairing · a`.
    Dual { base: Box<OperatorSpace>, pairing: CMatrix },
    Min { norm: BanachNorm },
    Max { norm: BanachNorm },
    SumInf { parts: Vec<OperatorSpace> },
    Sum1 { parts: Vec<OperatorSpace> },
    Quotient {
        base: Box<OperatorSpace>,
        /// Orthonormal basis of the kernel (columns, base coordinates).
        kernel: CMatrix,
        /// Orthonormal basis of the orthogonal complement of the kernel.
        #[serde(skip_serializing)]
        section: CMatrix,
    },
    /// `embedding` (ambient.dim × dim, injective) over a non-concrete ambient.
    Subspace { ambient: Box<OperatorSpace>, embedding: CMatrix },
    ProjTensor { left: Box<OperatorSpace>, right: Box<OperatorSpace> },
}

impl OperatorSpace {
    pub fn dim(&self) -> usize {
        match self {
            OperatorSpace::Concrete { basis, .. } => basis.len(),
            OperatorSpace::Dual { base, .. } => base.dim(),
            OperatorSpace::Min { norm } | OperatorSpace::Max { norm } => norm.dim(),
            OperatorSpace::SumInf { parts } | OperatorSpace::Sum1 { parts } => parts.iter().map(|p| p.dim()).sum(),
            OperatorSpace::Quotient { section, .. } => section.cols(),
            OperatorSpace::Subspace { embedding, .. } => embedding.cols(),
            OperatorSpace::ProjTensor { left, right } => left.dim() * right.dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            OperatorSpace::Concrete { .. } => "concrete",
            OperatorSpace::Dual { .. } => "dual",
            OperatorSpace::Min { .. } => "min",
            OperatorSpace::Max { .. } => "max",
            OperatorSpace::SumInf { .. } => "sumInf",
            OperatorSpace::Sum1 { .. } => "sum1",
            OperatorSpace::Quotient { .. } => "quotient",
            OperatorSpace::Subspace { .. } => "subspace",
            OperatorSpace::ProjTensor { .. } => "projTensor",
        }
    }

    /// Whether every norm is computed exactly (no optimizer involved).
    pub fn is_exact(&self) -> bool {
        match self {
            OperatorSpace::Concrete { .. } => true,
            OperatorSpace::SumInf { parts } => parts.iter().all(|p| p.is_exact()),
            OperatorSpace::Subspace { ambient, .. } => ambient.is_exact(),
            OperatorSpace::Dual { base, pairing } => matches!(&**base, OperatorSpace::Dual { base: inner, .. } if inner.is_exact())
                && inverse(pairing).is_ok(),
            _ => self.dim() == 0,
        }
    }

    /// Range offsets of the parts of a direct sum.
    pub fn part_offsets(parts: &[OperatorSpace]) -> Vec<usize> {
        let mut out = vec![0];
        for p in parts {
            out.push(out.last().unwrap() + p.dim());
        }
        out
    }

    /// `Some(k)` when this is exactly `trace_class(k)`.
    pub fn trace_class_order(&self) -> Option<usize> {
        let OperatorSpace::Dual { base, .. } = self else { return None };
        let OperatorSpace::Concrete { rows, cols, .. } = &**base else { return None };
        (rows == cols && *self == trace_class(*rows)).then_some(*rows)
    }

    /// `Some(d)` when this is exactly `column_hilbert(d)`.
    pub fn column_hilbert_dim(&self) -> Option<usize> {
        let OperatorSpace::Concrete { cols, .. } = self else { return None };
        let d = cols.checked_sub(1)?;
        (d > 0 && *self == column_hilbert(d)).then_some(d)
    }

    /// `Some(k)` when this is exactly `matrix_space(k)`.
    pub fn matrix_order(&self) -> Option<usize> {
        let OperatorSpace::Concrete { rows, cols, .. } = self else { return None };
        (rows == cols && *self == matrix_space(*rows)).then_some(*rows)
    }

    /// For a concrete space: the `(rows·cols) × dim` matrix whose columns are
    /// the row-major basis matrices.
    pub fn basis_matrix(&self) -> Option<CMatrix> {
        let OperatorSpace::Concrete { rows, cols, basis } = self else { return None };
        let mut m = CMatrix::zeros(rows * cols, basis.len());
        for (c, b) in basis.iter().enumerate() {
            for (t, z) in b.data().iter().enumerate() {
                m[(t, c)] = *z;
            }
        }
        Some(m)
    }

    /// The matrix `Σ_c x_c B_c` of a coordinate vector of a concrete space.
    pub fn concrete_matrix(&self, x: &[C64]) -> Option<CMatrix> {
        let OperatorSpace::Concrete { rows, cols, basis } = self else { return None };
        let mut m = CMatrix::zeros(*rows, *cols);
        for (z, b) in x.iter().zip(basis) {
            if *z != ZERO {
                m.add_scaled(*z, b);
            }
        }
        Some(m)
    }

    /// Coordinates of a matrix in a concrete space; errors when the matrix is
    /// not in the span.
    pub fn concrete_coords(&self, m: &CMatrix) -> Result<Vec<C64>> {
        let bm = self
            .basis_matrix()
            .ok_or_else(|| Error::Invalid("coordinates of a matrix need a concrete space".into()))?;
        let OperatorSpace::Concrete { rows, cols, .. } = self else { unreachable!() };
        if m.shape() != (*rows, *cols) {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, space lives in {}x{}",
                m.rows(),
                m.cols(),
                rows,
                cols
            )));
        }
        let x = solve_least_squares(&bm, m.data(), 1e-12);
        let back = bm.mul_vec(&x);
        let resid: f64 = back.iter().zip(m.data()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        if resid > 1e-9 * (1.0 + m.frobenius_norm()) {
            return Err(Error::NotContained(format!("residual {resid:.3e}")));
        }
        Ok(x)
    }
}

fn check_concrete(rows: usize, cols: usize, basis: &[CMatrix]) -> Result<()> {
    for b in basis {
        if b.shape() != (rows, cols) {
            return Err(Error::Dimension(format!(
                "basis matrix is {}x{}, expected {rows}x{cols}",
                b.rows(),
                b.cols()
            )));
        }
        if !b.is_finite() {
            return Err(Error::NonFinite);
        }
    }
    if basis.is_empty() {
        return Ok(());
    }
    let gram = CMatrix::from_fn(basis.len(), basis.len(), |a, b| basis[a].inner(&basis[b]));
    let min = hermitian_eigen(&gram).values[0];
    if min <= 1e-10 {
        return Err(Error::Invalid(format!(
            "basis is not linearly independent (Gram eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

/// Span of the given `rows × cols` matrices inside `B(ℂ^cols, ℂ^rows)`.
pub fn concrete(rows: usize, cols: usize, basis: Vec<CMatrix>) -> Result<OperatorSpace> {
    check_concrete(rows, cols, &basis)?;
    Ok(OperatorSpace::Concrete { rows, cols, basis })
}

/// The zero space.
pub fn zero_space() -> OperatorSpace {
    OperatorSpace::Concrete {
        rows: 0,
        cols: 0,
        basis: vec![],
    }
}

/// `M_k` with basis `e_ij` at index `i·k + j`; `k = 0` is the zero space.
pub fn matrix_space(k: usize) -> OperatorSpace {
    rect_matrix_space(k, k)
}

/// `M_{r,c}` with basis `e_ij` at index `i·c + j`.
pub fn rect_matrix_space(rows: usize, cols: usize) -> OperatorSpace {
    if rows == 0 || cols == 0 {
        return zero_space();
    }
    let basis = (0..rows * cols)
        .map(|t| CMatrix::unit(rows, cols, t / cols, t % cols))
        .collect();
    OperatorSpace::Concrete { rows, cols, basis }
}

/// `T_k = M_k*` under the trace pairing: coordinate `(i,j)` is the matrix
/// unit `e_ij` and `⟨x, a⟩ = tr(x a)`.
pub fn trace_class(k: usize) -> OperatorSpace {
    if k == 0 {
        return zero_space();
    }
    let n = k * k;
    let mut p = CMatrix::zeros(n, n);
    for i in 0..k {
        for j in 0..k {
            p[(i * k + j, j * k + i)] = ONE;
        }
    }
    OperatorSpace::Dual {
        base: Box::new(matrix_space(k)),
        pairing: p,
    }
}

/// Column Hilbert space `H_c ⊆ B(ℂ^{d+1})`: basis vector `i` is `e_{i+1,0}`.
pub fn column_hilbert(d: usize) -> OperatorSpace {
    if d == 0 {
        return zero_space();
    }
    let basis = (0..d).map(|i| CMatrix::unit(d + 1, d + 1, i + 1, 0)).collect();
    OperatorSpace::Concrete {
        rows: d + 1,
        cols: d + 1,
        basis,
    }
}

/// Dual space with the identity pairing `⟨f, a⟩ = Σ f_c a_c`.
pub fn dual(x: OperatorSpace) -> OperatorSpace {
    let n = x.dim();
    dual_with(x, CMatrix::identity(n)).expect("identity pairing is invertible")
}

/// Dual space with an invertible pairing matrix.
pub fn dual_with(x: OperatorSpace, pairing: CMatrix) -> Result<OperatorSpace> {
    let n = x.dim();
    if pairing.shape() != (n, n) {
        return Err(Error::Dimension("pairing must be dim × dim".into()));
    }
    if n > 0 {
        inverse(&pairing)?;
    }
    Ok(OperatorSpace::Dual {
        base: Box::new(x),
        pairing,
    })
}

pub fn min_quant(norm: BanachNorm) -> Result<OperatorSpace> {
    norm.validate()?;
    Ok(OperatorSpace::Min { norm })
}

pub fn max_quant(norm: BanachNorm) -> Result<OperatorSpace> {
    norm.validate()?;
    Ok(OperatorSpace::Max { norm })
}

/// `ℓ∞` direct sum; the empty sum is the zero space.
pub fn direct_sum_inf(parts: Vec<OperatorSpace>) -> OperatorSpace {
    if parts.is_empty() {
        return zero_space();
    }
    OperatorSpace::SumInf { parts }
}

/// `ℓ¹` direct sum; the empty sum is the zero space.
pub fn direct_sum_1(parts: Vec<OperatorSpace>) -> OperatorSpace {
    if parts.is_empty() {
        return zero_space();
    }
    OperatorSpace::Sum1 { parts }
}

pub fn proj_tensor(left: OperatorSpace, right: OperatorSpace) -> OperatorSpace {
    OperatorSpace::ProjTensor {
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Subspace spanned by the columns of `embedding` (ambient coordinates).
/// Over a concrete ambient the result is again concrete.
pub fn subspace(ambient: OperatorSpace, embedding: &CMatrix) -> Result<OperatorSpace> {
    if embedding.rows() != ambient.dim() {
        return Err(Error::NotContained(format!(
            "vectors have length {}, space has dimension {}",
            embedding.rows(),
            ambient.dim()
        )));
    }
    if embedding.cols() > 0 && rank(embedding, 1e-10) < embedding.cols() {
        return Err(Error::Invalid("subspace vectors are linearly dependent".into()));
    }
    if embedding.cols() == 0 {
        return Ok(zero_space());
    }
    match ambient {
        OperatorSpace::Concrete { rows, cols, basis } => {
            let new_basis = (0..embedding.cols())
                .map(|c| {
                    let mut m = CMatrix::zeros(rows, cols);
                    for (a, b) in basis.iter().enumerate() {
                        if embedding[(a, c)] != ZERO {
                            m.add_scaled(embedding[(a, c)], b);
                        }
                    }
                    m
                })
                .collect();
            concrete(rows, cols, new_basis)
        }
        other => Ok(OperatorSpace::Subspace {
            ambient: Box::new(other),
            embedding: embedding.clone(),
        }),
    }
}

/// Columns from a list of coordinate vectors.
pub fn columns(vectors: &[Vec<C64>], len: usize) -> Result<CMatrix> {
    if let Some(bad) = vectors.iter().find(|v| v.len() != len) {
        return Err(Error::NotContained(format!(
            "vector of length {} in a space of dimension {len}",
            bad.len()
        )));
    }
    Ok(CMatrix::from_fn(len, vectors.len(), |r, c| vectors[c][r]))
}

/// `X / N` for `N` spanned by the given coordinate vectors (any spanning
/// set; dependent vectors are allowed).
pub fn quotient_space(x: OperatorSpace, kernel_vectors: &[Vec<C64>]) -> Result<OperatorSpace> {
    let n = x.dim();
    let k = columns(kernel_vectors, n)?;
    if !k.is_finite() {
        return Err(Error::NonFinite);
    }
    let kernel = if k.cols() == 0 {
        CMatrix::zeros(n, 0)
    } else {
        range_basis(&k, 1e-10)
    };
    let section = if kernel.cols() == 0 {
        CMatrix::identity(n)
    } else {
        null_space(&kernel.adjoint(), 1e-10)
    };
    if section.cols() == 0 {
        return Ok(zero_space());
    }
    Ok(OperatorSpace::Quotient {
        base: Box::new(x),
        kernel,
        section,
    })
}

/// `X / N` for a concrete `X` and `N` given as matrices; each matrix must lie
/// in `X`.
pub fn quotient_by_matrices(x: OperatorSpace, kernel: &[CMatrix]) -> Result<OperatorSpace> {
    let vecs = kernel.iter().map(|m| x.concrete_coords(m)).collect::<Result<Vec<_>>>()?;
    quotient_space(x, &vecs)
}

/// JSON description accepted for an operator space: the canonical kinds plus
/// shorthands `matrix`, `traceClass`, `columnHilbert` and `zero`.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
enum SpaceSpec {
    #[serde(rename_all = "camelCase")]
    Concrete {
        ambient_dim: Option<usize>,
        rows: Option<usize>,
        cols: Option<usize>,
        basis: Vec<CMatrix>,
    },
    Matrix {
        k: usize,
    },
    TraceClass {
        k: usize,
    },
    ColumnHilbert {
        d: usize,
    },
    Zero {},
    Dual {
        base: Box<OperatorSpace>,
        pairing: Option<CMatrix>,
    },
    Min {
        norm: BanachNorm,
    },
    Max {
        norm: BanachNorm,
    },
    SumInf {
        parts: Vec<OperatorSpace>,
    },
    Sum1 {
        parts: Vec<OperatorSpace>,
    },
    Quotient {
        base: Box<OperatorSpace>,
        kernel: KernelSpec,
    },
    Subspace {
        ambient: Box<OperatorSpace>,
        embedding: KernelSpec,
    },
    ProjTensor {
        left: Box<OperatorSpace>,
        right: Box<OperatorSpace>,
    },
}

/// Either a matrix whose columns are the vectors or a list of vectors.
#[derive(Deserialize)]
#[serde(untagged)]
enum KernelSpec {
    Matrix(CMatrix),
    Vectors(Vec<Vectorized>),
}

#[derive(Deserialize)]
struct Vectorized(#[serde(with = "cvec")] Vec<C64>);

impl KernelSpec {
    fn into_matrix(self, len: usize) -> Result<CMatrix> {
        match self {
            KernelSpec::Matrix(m) => {
                if m.rows() != len {
                    return Err(Error::NotContained(format!(
                        "vectors have length {}, space has dimension {len}",
                        m.rows()
                    )));
                }
                Ok(m)
            }
            KernelSpec::Vectors(v) => columns(&v.into_iter().map(|x| x.0).collect::<Vec<_>>(), len),
        }
    }
}

impl TryFrom<SpaceSpec> for OperatorSpace {
    type Error = Error;

    fn try_from(spec: SpaceSpec) -> Result<Self> {
        match spec {
            SpaceSpec::Concrete {
                ambient_dim,
                rows,
                cols,
                basis,
            } => {
                let guess = basis.first().map(|b| b.shape());
                let rows = rows.or(ambient_dim).or(guess.map(|g| g.0)).unwrap_or(0);
                let cols = cols.or(ambient_dim).or(guess.map(|g| g.1)).unwrap_or(0);
                concrete(rows, cols, basis)
            }
            SpaceSpec::Matrix { k } => Ok(matrix_space(k)),
            SpaceSpec::TraceClass { k } => Ok(trace_class(k)),
            SpaceSpec::ColumnHilbert { d } => Ok(column_hilbert(d)),
            SpaceSpec::Zero {} => Ok(zero_space()),
            SpaceSpec::Dual { base, pairing } => {
                let n = base.dim();
                dual_with(*base, pairing.unwrap_or_else(|| CMatrix::identity(n)))
            }
            SpaceSpec::Min { norm } => min_quant(norm),
            SpaceSpec::Max { norm } => max_quant(norm),
            SpaceSpec::SumInf { parts } => Ok(direct_sum_inf(parts)),
            SpaceSpec::Sum1 { parts } => Ok(direct_sum_1(parts)),
            SpaceSpec::Quotient { base, kernel } => {
                let k = kernel.into_matrix(base.dim())?;
                let vecs: Vec<Vec<C64>> = (0..k.cols()).map(|c| k.col(c)).collect();
                quotient_space(*base, &vecs)
            }
            SpaceSpec::Subspace { ambient, embedding } => {
                let e = embedding.into_matrix(ambient.dim())?;
                subspace(*ambient, &e)
            }
            SpaceSpec::ProjTensor { left, right } => Ok(proj_tensor(*left, *right)),
        }
    }
}

impl std::fmt::Display for OperatorSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(k) = self.matrix_order() {
            return write!(f, "M_{k}");
        }
        if let Some(k) = self.trace_class_order() {
            return write!(f, "T_{k}");
        }
        if let Some(d) = self.column_hilbert_dim() {
            return write!(f, "H_c({d})");
        }
        match self {
            OperatorSpace::Concrete { rows, cols, basis } => {
                if basis.is_empty() {
                    write!(f, "0")
                } else {
                    write!(f, "span{{{} matrices in {rows}x{cols}}}", basis.len())
                }
            }
            OperatorSpace::Dual { base, .. } => write!(f, "({base})*"),
            OperatorSpace::Min { norm } => write!(f, "MIN({})", norm_label(norm)),
            OperatorSpace::Max { norm } => write!(f, "MAX({})", norm_label(norm)),
            OperatorSpace::SumInf { parts } => join(f, parts, " (+)inf "),
            OperatorSpace::Sum1 { parts } => join(f, parts, " (+)1 "),
            OperatorSpace::Quotient { base, kernel, .. } => write!(f, "{base}/N[{}]", kernel.cols()),
            OperatorSpace::Subspace { ambient, embedding } => write!(f, "sub[{}]({ambient})", embedding.cols()),
            OperatorSpace::ProjTensor { left, right } => write!(f, "({left} (x)^ {right})"),
        }
    }
}

fn join(f: &mut std::fmt::Formatter<'_>, parts: &[OperatorSpace], sep: &str) -> std::fmt::Result {
    write!(f, "(")?;
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            write!(f, "{sep}")?;
        }
        write!(f, "{p}")?;
    }
    write!(f, ")")
}

fn norm_label(n: &BanachNorm) -> String {
    match n {
        BanachNorm::Modulus => "C".into(),
        BanachNorm::Euclidean { dim } => format!("l2({dim})"),
        BanachNorm::L1 { dim } => format!("l1({dim})"),
        BanachNorm::LInf { dim } => format!("linf({dim})"),
        BanachNorm::Operator { rows, cols } => format!("op({rows}x{cols})"),
        BanachNorm::Trace { rows, cols } => format!("tr({rows}x{cols})"),
        BanachNorm::Pullback { inner, .. } => format!("pullback of {}", norm_label(inner)),
        BanachNorm::Level1 { space } => format!("level-1 of {space}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::c;

    #[test]
    fn dims() {
        assert_eq!(matrix_space(3).dim(), 9);
        assert_eq!(matrix_space(0).dim(), 0);
        assert_eq!(trace_class(2).dim(), 4);
        assert_eq!(column_hilbert(3).dim(), 3);
        assert_eq!(direct_sum_1(vec![matrix_space(1), matrix_space(2)]).dim(), 5);
        assert_eq!(proj_tensor(matrix_space(2), column_hilbert(2)).dim(), 8);
    }

    #[test]
    fn dependent_basis_rejected() {
        let e = CMatrix::identity(2);
        assert!(concrete(2, 2, vec![e.clone(), e.scale(c(2.0, 0.0))]).is_err());
    }

    #[test]
    fn quotient_edge_cases() {
        let m = matrix_space(2);
        let all: Vec<Vec<C64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { ONE } else { ZERO }).collect())
            .collect();
        assert_eq!(quotient_space(m.clone(), &all).unwrap().dim(), 0);
        assert_eq!(quotient_space(m.clone(), &[]).unwrap().dim(), 4);
        assert!(matches!(
            quotient_space(m.clone(), &[vec![ONE; 3]]),
            Err(Error::NotContained(_))
        ));
        let outside = CMatrix::identity(3);
        assert!(quotient_by_matrices(m, &[outside]).is_err());
    }

    #[test]
    fn json_shorthands_and_roundtrip() {
        let t: OperatorSpace = serde_json::from_str(r#"{"kind":"traceClass","k":2}"#).unwrap();
        assert_eq!(t, trace_class(2));
        let s = serde_json::to_string(&t).unwrap();
        let back: OperatorSpace = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        let q = quotient_space(matrix_space(2), &[vec![ONE, ZERO, ZERO, ONE]]).unwrap();
        let back: OperatorSpace = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back.dim(), 3);
        let conc = r#"{"kind":"concrete","ambientDim":2,"basis":[{"rows":2,"cols":2,"data":[[1,0],[0,0],[0,0],[1,0]]}]}"#;
        assert_eq!(serde_json::from_str::<OperatorSpace>(conc).unwrap().dim(), 1);
        let bad = r#"{"kind":"concrete","ambientDim":3,"basis":[{"rows":2,"cols":2,"data":[[1,0],[0,0],[0,0],[1,0]]}]}"#;
        assert!(serde_json::from_str::<OperatorSpace>(bad).is_err());
    }

    #[test]
    fn pullback_with_kernel_is_not_a_norm() {
        let map = CMatrix::from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let n = BanachNorm::Pullback {
            inner: Box::new(BanachNorm::Euclidean { dim: 2 }),
            map,
        };
        assert!(matches!(min_quant(n), Err(Error::NotANorm(_))));
    }

    #[test]
    fn recognizers() {
        assert_eq!(trace_class(3).trace_class_order(), Some(3));
        assert_eq!(column_hilbert(2).column_hilbert_dim(), Some(2));
        assert_eq!(matrix_space(2).matrix_order(), Some(2));
        assert_eq!(
            BanachNorm::level1_of(&matrix_space(2)),
            BanachNorm::Operator { rows: 2, cols: 2 }
        );
    }
}
