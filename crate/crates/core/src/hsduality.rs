//! Quantum channels in the Schrödinger and Heisenberg pictures, the
//! trace-pairing transpose and the correspondence between the two pictures.
//!
//! Superoperators act on column-stacked vectorizations:
//! `vec(x)[i + j·d] = x[i, j]`, so `vec(a x b) = (bᵀ ⊗ a) vec(x)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cbmaps::{cb_norm_lower, is_complete_contraction, CbMap, MapCheck};
use crate::error::{Error, Result};
use crate::numerics::linalg::{hermitian_eigen, hermiticity_defect};
use crate::numerics::random::{random_isometry, random_pure_state};
use crate::numerics::{kron, operator_norm, CMatrix, OptimizerConfig, C64, ONE, ZERO};
use crate::opspace::{matrix_space, trace_class, OperatorSpace};
use crate::verdict::Verdict;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Picture {
    Schrodinger,
    Heisenberg,
}

impl Picture {
    pub fn flipped(self) -> Self {
        match self {
            Picture::Schrodinger => Picture::Heisenberg,
            Picture::Heisenberg => Picture::Schrodinger,
        }
    }
}

/// Linear map `M_{dimIn} → M_{dimOut}` given by its superoperator
/// (`dimOut² × dimIn²`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", try_from = "ChannelRepr")]
pub struct Channel {
    pub dim_in: usize,
    pub dim_out: usize,
    pub picture: Picture,
    pub superop: CMatrix,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ChannelRepr {
    dim_in: usize,
    dim_out: usize,
    picture: Picture,
    superop: CMatrix,
}

impl TryFrom<ChannelRepr> for Channel {
    type Error = Error;

    fn try_from(r: ChannelRepr) -> Result<Self> {
        Channel::new(r.dim_in, r.dim_out, r.picture, r.superop)
    }
}

/// `tr(x b)`.
pub fn trace_pairing(x: &CMatrix, b: &CMatrix) -> Result<C64> {
    if x.shape() != b.shape() || x.rows() != x.cols() {
        return Err(Error::Dimension(format!(
            "trace pairing needs square matrices of one size, got {}x{} and {}x{}",
            x.rows(),
            x.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let d = x.rows();
    Ok((0..d).flat_map(|i| (0..d).map(move |k| (i, k))).map(|(i, k)| x[(i, k)] * b[(k, i)]).sum())
}

impl Channel {
    pub fn new(dim_in: usize, dim_out: usize, picture: Picture, superop: CMatrix) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::Invalid("channel dimensions must be positive".into()));
        }
        if superop.shape() != (dim_out * dim_out, dim_in * dim_in) {
            return Err(Error::Dimension(format!(
                "superoperator is {}x{}, expected {}x{}",
                superop.rows(),
                superop.cols(),
                dim_out * dim_out,
                dim_in * dim_in
            )));
        }
        if !superop.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            dim_in,
            dim_out,
            picture,
            superop,
        })
    }

    /// Superoperator of `f`, evaluated on the matrix units.
    pub fn from_fn(dim_in: usize, dim_out: usize, picture: Picture, f: impl Fn(&CMatrix) -> CMatrix) -> Result<Self> {
        let mut s = CMatrix::zeros(dim_out * dim_out, dim_in * dim_in);
        for j in 0..dim_in {
            for i in 0..dim_in {
                let img = f(&CMatrix::unit(dim_in, dim_in, i, j));
                if img.shape() != (dim_out, dim_out) {
                    return Err(Error::Dimension("map output has the wrong shape".into()));
                }
                for (r, z) in img.vec_cols().into_iter().enumerate() {
                    s[(r, i + j * dim_in)] = z;
                }
            }
        }
        Channel::new(dim_in, dim_out, picture, s)
    }

    pub fn identity(d: usize, picture: Picture) -> Self {
        Channel::new(d, d, picture, CMatrix::identity(d * d)).expect("valid")
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.shape() != (self.dim_in, self.dim_in) {
            return Err(Error::Dimension(format!(
                "input is {}x{}, channel expects {}x{}",
                x.rows(),
                x.cols(),
                self.dim_in,
                self.dim_in
            )));
        }
        Ok(CMatrix::unvec_cols(&self.superop.mul_vec(&x.vec_cols()), self.dim_out, self.dim_out))
    }

    /// `Φ(e_ij)`.
    pub fn unit_image(&self, i: usize, j: usize) -> CMatrix {
        let col = self.superop.col(i + j * self.dim_in);
        CMatrix::unvec_cols(&col, self.dim_out, self.dim_out)
    }

    /// The adjoint under the trace pairing: `tr(ψ(x) b) = tr(x ψᵗ(b))`.
    pub fn transpose(&self) -> Self {
        // ψᵗ(b) = Σ_pq tr(ψ(e_pq) b) e_qp
        let (di, d_o) = (self.dim_in, self.dim_out);
        let mut s = CMatrix::zeros(di * di, d_o * d_o);
        for p in 0..di {
            for q in 0..di {
                let img = self.unit_image(p, q);
                // tr(img e_kl) = img[l, k]; output entry (q, p)
                for k in 0..d_o {
                    for l in 0..d_o {
                        s[(q + p * di, k + l * d_o)] = img[(l, k)];
                    }
                }
            }
        }
        Channel::new(d_o, di, self.picture.flipped(), s).expect("valid")
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Channel) -> Result<Self> {
        if other.dim_out != self.dim_in {
            return Err(Error::Dimension("inner output differs from outer input".into()));
        }
        Channel::new(other.dim_in, self.dim_out, self.picture, &self.superop * &other.superop)
    }

    /// `Φ ⊗ Ψ` on `M_{a·c}`, with `e_ij ⊗ e_kl ↦ Φ(e_ij) ⊗ Ψ(e_kl)`.
    pub fn tensor(&self, other: &Channel) -> Self {
        let (a, c) = (self.dim_in, other.dim_in);
        Channel::from_fn(a * c, self.dim_out * other.dim_out, self.picture, |e| {
            // e is a single matrix unit at ((i,k),(j,l))
            let pos = e.data().iter().position(|z| *z != ZERO).expect("matrix unit");
            let (r, s) = (pos / (a * c), pos % (a * c));
            kron(&self.unit_image(r / c, s / c), &other.unit_image(r % c, s % c))
        })
        .expect("shapes agree")
    }

    /// `C = Σ_ij e_ij ⊗ Φ(e_ij)`.
    pub fn choi(&self) -> ChoiMatrix {
        let (di, d_o) = (self.dim_in, self.dim_out);
        let mut c = CMatrix::zeros(di * d_o, di * d_o);
        for i in 0..di {
            for j in 0..di {
                c.set_block(i * d_o, j * d_o, &self.unit_image(i, j));
            }
        }
        ChoiMatrix { matrix: c }
    }

    /// The map on coordinates: matrix spaces in the Heisenberg picture,
    /// trace classes in the Schrödinger picture (row-major matrix units in
    /// both cases).
    pub fn to_cbmap(&self) -> CbMap {
        let (dom, cod): (OperatorSpace, OperatorSpace) = match self.picture {
            Picture::Heisenberg => (matrix_space(self.dim_in), matrix_space(self.dim_out)),
            Picture::Schrodinger => (trace_class(self.dim_in), trace_class(self.dim_out)),
        };
        let (di, d_o) = (self.dim_in, self.dim_out);
        let coeffs = CMatrix::from_fn(d_o * d_o, di * di, |r, c| {
            let (i, j) = (c / di, c % di);
            let (p, q) = (r / d_o, r % d_o);
            self.superop[(p + q * d_o, i + j * di)]
        });
        CbMap::new(dom, cod, coeffs).expect("dimensions agree")
    }

    /// `t ↦ t·ρ` from `ℂ = T(ℂ)`.
    pub fn state_prep(rho: &CMatrix) -> Result<Self> {
        check_density(rho)?;
        let d = rho.rows();
        Channel::new(1, d, Picture::Schrodinger, CMatrix::from_vec(d * d, 1, rho.vec_cols())?)
    }

    /// `t ↦ u t u†`.
    pub fn apply_unitary(u: &CMatrix) -> Result<Self> {
        let d = u.rows();
        if u.cols() != d || d == 0 {
            return Err(Error::Dimension("unitary must be square".into()));
        }
        let dev = (&(&u.adjoint() * u) - &CMatrix::identity(d)).max_abs();
        if dev > 1e-9 {
            return Err(Error::NotUnitary { deviation: dev });
        }
        Channel::new(d, d, Picture::Schrodinger, kron(&u.conj(), u))
    }

    /// `t ↦ Σ_x |x⟩⟨x| t |x⟩⟨x|`.
    pub fn measure_basis(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid("dimension must be positive".into()));
        }
        Channel::from_fn(d, d, Picture::Schrodinger, |t| {
            CMatrix::from_fn(d, d, |i, j| if i == j { t[(i, i)] } else { ZERO })
        })
    }

    /// `x ↦ tr_E(V x V†)` for a random isometry `V: ℂ^{dimIn} → ℂ^{dimOut} ⊗ ℂ^{env}`.
    pub fn random_cptp<R: Rng + ?Sized>(rng: &mut R, dim_in: usize, dim_out: usize, env: usize) -> Result<Self> {
        if dim_out * env < dim_in {
            return Err(Error::Invalid("dilation space too small for an isometry".into()));
        }
        let v = random_isometry(rng, dim_out * env, dim_in);
        Channel::from_fn(dim_in, dim_out, Picture::Schrodinger, |x| {
            let big = &(&v * x) * &v.adjoint();
            CMatrix::from_fn(dim_out, dim_out, |p, q| (0..env).map(|e| big[(p * env + e, q * env + e)]).sum())
        })
    }

    pub fn is_completely_positive(&self) -> PredicateCheck {
        let c = self.choi().matrix;
        let scale = operator_norm(&c);
        let herm = hermiticity_defect(&c);
        if herm > 1e-9 * scale.max(1.0) {
            return PredicateCheck::new(Verdict::Fails, herm, "Choi matrix is not Hermitian");
        }
        let min = hermitian_eigen(&c.hermitian_part()).values[0];
        let verdict = Verdict::from_bool(min >= -1e-9 * scale);
        PredicateCheck::new(verdict, (-min).max(0.0), "smallest Choi eigenvalue is nonnegative")
    }

    pub fn is_trace_preserving(&self, tol: f64) -> PredicateCheck {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim_in {
            for j in 0..self.dim_in {
                let want = if i == j { ONE } else { ZERO };
                worst = worst.max((self.unit_image(i, j).trace() - want).norm());
            }
        }
        PredicateCheck::new(Verdict::from_bool(worst <= tol), worst, "trace of every matrix unit is kept")
    }

    pub fn is_unital(&self, tol: f64) -> PredicateCheck {
        // 1_in ↦ 1_out; rectangular maps are allowed
        let dev = match self.apply(&CMatrix::identity(self.dim_in)) {
            Ok(img) => (&img - &CMatrix::identity(self.dim_out)).max_abs(),
            Err(_) => f64::INFINITY,
        };
        PredicateCheck::new(Verdict::from_bool(dev <= tol), dev, "identity is mapped to identity")
    }

    /// CP fast path, then PSD preservation on seeded pure states. Sampling
    /// can only refute, so a clean sample run is inconclusive.
    pub fn is_positive(&self, samples: usize, seed: u64) -> PredicateCheck {
        if self.is_completely_positive().verdict == Verdict::Holds {
            return PredicateCheck::new(Verdict::Holds, 0.0, "completely positive");
        }
        let mut rng = crate::numerics::random::rng_for(seed, 0x905);
        let mut worst: f64 = 0.0;
        let mut inputs: Vec<CMatrix> = (0..self.dim_in).map(|i| CMatrix::unit(self.dim_in, self.dim_in, i, i)).collect();
        inputs.extend((0..samples).map(|_| random_pure_state(&mut rng, self.dim_in)));
        for rho in &inputs {
            let out = self.apply(rho).expect("shape");
            let scale = operator_norm(&out).max(1.0);
            let herm = hermiticity_defect(&out);
            if herm > 1e-9 * scale {
                return PredicateCheck::new(Verdict::Fails, herm, "a positive input has a non-Hermitian image");
            }
            let min = hermitian_eigen(&out.hermitian_part()).values[0];
            worst = worst.max(-min);
            if min < -1e-9 * scale {
                return PredicateCheck::new(Verdict::Fails, -min, "a positive input has an image with a negative eigenvalue");
            }
        }
        PredicateCheck::new(Verdict::Inconclusive, worst.max(0.0), "no sampled positive input was refuted")
    }

    /// Every linear map between finite-dimensional matrix algebras is normal.
    pub fn is_normal(&self) -> PredicateCheck {
        PredicateCheck::new(Verdict::Holds, 0.0, "automatic in finite dimension")
    }
}

fn check_density(rho: &CMatrix) -> Result<()> {
    if rho.rows() != rho.cols() || rho.rows() == 0 {
        return Err(Error::NotDensity("matrix is not square".into()));
    }
    let h = hermiticity_defect(rho);
    if h > 1e-9 {
        return Err(Error::NotDensity(format!("Hermiticity defect {h:.3e}")));
    }
    let min = hermitian_eigen(&rho.hermitian_part()).values[0];
    if min < -1e-9 {
        return Err(Error::NotDensity(format!("negative eigenvalue {min:.3e}")));
    }
    let tr = rho.trace();
    if (tr - ONE).norm() > 1e-9 {
        return Err(Error::NotDensity(format!("trace {:.12}", tr.re)));
    }
    Ok(())
}

/// Choi matrix with its vectorization label.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    pub matrix: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct ChoiRepr {
    choi: CMatrix,
    convention: String,
}

impl Serialize for ChoiMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChoiRepr {
            choi: self.matrix.clone(),
            convention: "col-stacking".into(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ChoiMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = ChoiRepr::deserialize(d)?;
        if r.convention != "col-stacking" {
            return Err(D::Error::custom(format!("unsupported convention {:?}", r.convention)));
        }
        Ok(ChoiMatrix { matrix: r.choi })
    }
}

/// A predicate verdict with the size of the deviation behind it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PredicateCheck {
    pub verdict: Verdict,
    pub defect: f64,
    pub label: String,
}

impl PredicateCheck {
    fn new(verdict: Verdict, defect: f64, label: &str) -> Self {
        Self {
            verdict,
            defect,
            label: label.into(),
        }
    }
}

/// Both sides of an equivalence and whether they agree.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Equivalence {
    pub label: String,
    pub left: PredicateCheck,
    pub right: PredicateCheck,
    pub verdict: Verdict,
}

impl Equivalence {
    fn new(label: &str, left: PredicateCheck, right: PredicateCheck) -> Self {
        let verdict = match (left.verdict, right.verdict) {
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            (a, b) => Verdict::from_bool(a == b),
        };
        Self {
            label: label.into(),
            left,
            right,
            verdict,
        }
    }
}

/// Comparison of the cb lower bounds of a map and its transpose.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CbComparison {
    pub label: String,
    pub max_level: usize,
    pub channel_per_level: Vec<f64>,
    pub transpose_per_level: Vec<f64>,
    pub max_difference: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HsSuiteReport {
    pub pairing: PredicateCheck,
    pub involution: PredicateCheck,
    pub cp: Equivalence,
    pub tp_unital: Equivalence,
    pub cb: CbComparison,
    pub cptp_ncpu: Equivalence,
    pub normal: PredicateCheck,
    pub verdict: Verdict,
}

/// Largest `|tr(ψ(e_ij) e_pq) − tr(e_ij ψᵗ(e_pq))|` over the matrix units.
pub fn pairing_defect(psi: &Channel, psi_t: &Channel) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..psi.dim_in {
        for j in 0..psi.dim_in {
            let x = CMatrix::unit(psi.dim_in, psi.dim_in, i, j);
            let left = psi.unit_image(i, j);
            for p in 0..psi.dim_out {
                for q in 0..psi.dim_out {
                    let b = CMatrix::unit(psi.dim_out, psi.dim_out, p, q);
                    let a = trace_pairing(&left, &b).expect("square");
                    let c = trace_pairing(&x, &psi_t.unit_image(p, q)).expect("square");
                    worst = worst.max((a - c).norm());
                }
            }
        }
    }
    worst
}

/// Runs every equivalence between a map and its transpose. `tol_alg` is
/// the algebraic tolerance, `tol_cb` the allowed gap between cb lower
/// bounds at matched levels.
pub fn hs_correspondence_suite(
    psi: &Channel,
    max_level: usize,
    cfg: &OptimizerConfig,
    tol_alg: f64,
    tol_cb: f64,
) -> Result<HsSuiteReport> {
    let psi_t = psi.transpose();
    let defect = pairing_defect(psi, &psi_t);
    let pairing = PredicateCheck::new(
        Verdict::from_bool(defect <= tol_alg),
        defect,
        "trace pairing adjunction on matrix units",
    );
    let back = psi_t.transpose();
    let inv = (&back.superop - &psi.superop).max_abs();
    let involution = PredicateCheck::new(
        Verdict::from_bool(inv <= tol_alg && back.picture == psi.picture),
        inv,
        "transpose is an involution",
    );
    let cp = Equivalence::new(
        "completely positive iff the transpose is",
        psi.is_completely_positive(),
        psi_t.is_completely_positive(),
    );
    let tp_unital = Equivalence::new(
        "trace preserving iff the transpose is unital",
        psi.is_trace_preserving(tol_alg),
        psi_t.is_unital(tol_alg),
    );

    // cb norms: the map and its transpose see the same levels
    let (lhs, rhs) = match psi.picture {
        Picture::Schrodinger => (psi.to_cbmap(), psi_t.to_cbmap()),
        Picture::Heisenberg => (psi_t.to_cbmap(), psi.to_cbmap()),
    };
    let a = cb_norm_lower(&lhs, max_level, &cfg.derived(1))?;
    let b = cb_norm_lower(&rhs, max_level, &cfg.derived(2))?;
    let max_difference = a
        .per_level
        .iter()
        .zip(&b.per_level)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let cb = CbComparison {
        label: "cb norm of a map equals that of its transpose".into(),
        max_level,
        channel_per_level: a.per_level,
        transpose_per_level: b.per_level,
        max_difference,
        tolerance: tol_cb,
        verdict: Verdict::from_bool(max_difference <= tol_cb),
    };

    let both = |x: PredicateCheck, y: PredicateCheck, label: &str| {
        let verdict = x.verdict.and(y.verdict);
        PredicateCheck::new(verdict, x.defect.max(y.defect), label)
    };
    let cptp_ncpu = Equivalence::new(
        "CPTP channels correspond to normal completely positive unital maps",
        both(psi.is_completely_positive(), psi.is_trace_preserving(tol_alg), "channel is CPTP"),
        both(
            both(psi_t.is_completely_positive(), psi_t.is_unital(tol_alg), "CPU"),
            psi_t.is_normal(),
            "transpose is NCPU",
        ),
    );
    let normal = psi_t.is_normal();
    let verdict = Verdict::all([
        pairing.verdict,
        involution.verdict,
        cp.verdict,
        tp_unital.verdict,
        cb.verdict,
        cptp_ncpu.verdict,
    ]);
    Ok(HsSuiteReport {
        pairing,
        involution,
        cp,
        tp_unital,
        cb,
        cptp_ncpu,
        normal,
        verdict,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CcCpReport {
    pub label: String,
    /// `"unital"` (maps on matrix spaces) or `"trace preserving"` (maps on
    /// trace classes).
    pub regime: String,
    pub cp: PredicateCheck,
    pub contraction: MapCheck,
    /// Both verdicts decided and equal: holds; decided and different:
    /// fails; otherwise inconclusive.
    pub verdict: Verdict,
}

/// Cross-checks the Choi verdict against the complete-contraction verdict
/// for a unital or trace-preserving map.
pub fn cc_iff_cp_suite(phi: &Channel, max_level: usize, cfg: &OptimizerConfig, tol: f64) -> Result<CcCpReport> {
    let unital = phi.is_unital(1e-9).verdict == Verdict::Holds;
    let tp = phi.is_trace_preserving(1e-9).verdict == Verdict::Holds;
    if !unital && !tp {
        return Err(Error::NeitherUnitalNorTp);
    }
    let (map, regime, level, label) = if unital {
        let m = Channel {
            picture: Picture::Heisenberg,
            ..phi.clone()
        };
        // the codomain is M_dimOut, so that level decides the cb norm
        (
            m.to_cbmap(),
            "unital",
            max_level.max(phi.dim_out),
            "a unital map is completely positive iff it is a complete contraction",
        )
    } else {
        let m = Channel {
            picture: Picture::Schrodinger,
            ..phi.clone()
        };
        (
            m.to_cbmap(),
            "trace preserving",
            max_level,
            "a trace-preserving map is completely positive iff it is a complete contraction",
        )
    };
    let cp = phi.is_completely_positive();
    let contraction = is_complete_contraction(&map, level, cfg, tol)?;
    let verdict = match (cp.verdict, contraction.verdict) {
        (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
        (a, b) => Verdict::from_bool(a == b),
    };
    Ok(CcCpReport {
        label: label.into(),
        regime: regime.into(),
        cp,
        contraction,
        verdict,
    })
}

/// `x ↦ (1−t) u x u† + t v xᵀ v†` on `M_d`: unital, and not completely
/// positive for large enough `t`.
pub fn mixed_transpose_map(u: &CMatrix, v: &CMatrix, t: f64) -> Result<Channel> {
    let d = u.rows();
    Channel::from_fn(d, d, Picture::Heisenberg, |x| {
        let a = (&(u * x) * &u.adjoint()).scale_real(1.0 - t);
        let b = (&(v * &x.transpose()) * &v.adjoint()).scale_real(t);
        &a + &b
    })
}

/// The transpose on `M_d` as a channel.
pub fn transpose_channel(d: usize, picture: Picture) -> Channel {
    Channel::from_fn(d, d, picture, CMatrix::transpose).expect("square")
}
