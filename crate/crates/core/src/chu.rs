//! Chu objects over operator spaces: pairs `(X, Y)` with a jointly
//! completely contractive pairing into `ℂ`, their morphisms, the duality,
//! the spatial tensor on Hilbert–Schmidt objects, additive sums and a small
//! polarized formula language interpreted compositionally.

use serde::{Deserialize, Serialize};

use crate::cbmaps::{is_complete_contraction, CbMap, MapCheck};
use crate::error::{Error, Result};
use crate::hsduality::{Channel, Picture};
use crate::numerics::{kron, CMatrix, OptimizerConfig, C64, ONE};
use crate::opspace::{concrete, direct_sum_1, direct_sum_inf, matrix_space, proj_tensor, trace_class, OperatorSpace};
use crate::tensors::{jcb_norm, BilinearMap};
use crate::verdict::Verdict;

/// Tolerance for exact linear identities (adjointness, transposes).
pub const EXACT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChuObject {
    pub left: OperatorSpace,
    pub right: OperatorSpace,
    /// Scalar-valued; coefficient at `x·dim(Y) + y`.
    pub pairing: BilinearMap,
}

impl ChuObject {
    pub fn new(left: OperatorSpace, right: OperatorSpace, pairing: CMatrix) -> Result<Self> {
        let pairing = BilinearMap::new(left.clone(), right.clone(), matrix_space(1), pairing)?;
        Ok(Self { left, right, pairing })
    }

    /// `d(x, y)` on coordinates.
    pub fn pair(&self, x: &[C64], y: &[C64]) -> C64 {
        self.pairing.apply(x, y)[0]
    }

    /// The pairing as a `dim X × dim Y` matrix `D` with `d(x, y) = xᵀ D y`.
    pub fn pairing_matrix(&self) -> CMatrix {
        let (nx, ny) = (self.left.dim(), self.right.dim());
        CMatrix::from_fn(nx, ny, |a, b| self.pairing.coeffs[(0, a * ny + b)])
    }

    /// `Some(d)` when this is exactly `hs_object(d)`.
    pub fn hs_order(&self) -> Option<usize> {
        let d = self.left.trace_class_order()?;
        (*self == hs_object(d)).then_some(d)
    }
}

fn from_pairing_matrix(left: OperatorSpace, right: OperatorSpace, m: &CMatrix) -> ChuObject {
    let coeffs = CMatrix::from_vec(1, m.rows() * m.cols(), m.data().to_vec()).expect("shape");
    ChuObject::new(left, right, coeffs).expect("dimensions agree")
}

/// `(T_d, M_d, tr(x b))`.
pub fn hs_object(d: usize) -> ChuObject {
    let n = d * d;
    let m = CMatrix::from_fn(n, n, |a, b| {
        let (i, j, k, l) = (a / d, a % d, b / d, b % d);
        if j == k && i == l {
            ONE
        } else {
            C64::new(0.0, 0.0)
        }
    });
    from_pairing_matrix(trace_class(d), matrix_space(d), &m)
}

/// Swaps the components; the pairing is precomposed with the flip.
pub fn dual(a: &ChuObject) -> ChuObject {
    from_pairing_matrix(a.right.clone(), a.left.clone(), &a.pairing_matrix().transpose())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JccCheck {
    pub label: String,
    pub max_level: usize,
    pub lower: f64,
    pub verdict: Verdict,
}

/// Searches for a witness pushing the pairing above `1 + tol` at levels up to
/// `max_level`; finding none is reported as holding.
pub fn verify_jcc(a: &ChuObject, max_level: usize, cfg: &OptimizerConfig, tol: f64) -> Result<JccCheck> {
    let r = jcb_norm(&a.pairing, max_level, cfg)?;
    let lower = r.estimate.lower;
    Ok(JccCheck {
        label: "the pairing is jointly completely contractive".into(),
        max_level,
        lower,
        verdict: if lower <= 1.0 + tol { Verdict::Holds } else { Verdict::Fails },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChuMorphism {
    /// `f: X₁ → X₂`.
    pub forward: CbMap,
    /// `g: Y₂ → Y₁`.
    pub backward: CbMap,
}

impl ChuMorphism {
    /// `(Φ, Φᵗ)` between HS objects for a Schrödinger-picture channel.
    pub fn from_channel(phi: &Channel) -> Result<Self> {
        if phi.picture != Picture::Schrodinger {
            return Err(Error::Invalid("forward channel must act on states".into()));
        }
        Ok(Self {
            forward: phi.to_cbmap(),
            backward: phi.transpose().to_cbmap(),
        })
    }

    pub fn identity(a: &ChuObject) -> Self {
        Self {
            forward: CbMap::identity(a.left.clone()),
            backward: CbMap::identity(a.right.clone()),
        }
    }
}

/// `(f, g)^⊥ = (g, f)`.
pub fn dual_morphism(m: &ChuMorphism) -> ChuMorphism {
    ChuMorphism {
        forward: m.backward.clone(),
        backward: m.forward.clone(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MorphismCheck {
    pub label: String,
    pub adjointness_defect: f64,
    /// Basis indices `(x in X₁, y in Y₂)` of the largest defect.
    pub adjointness_witness: (usize, usize),
    /// Present for HS objects: `max |g − fᵗ|` on coefficients.
    pub transpose_defect: Option<f64>,
    pub forward: MapCheck,
    pub backward: MapCheck,
    pub verdict: Verdict,
}

/// Checks adjointness on full bases and complete contractivity of both
/// components; between HS objects also compares `g` with `fᵗ`.
pub fn morphism_valid(
    m: &ChuMorphism,
    a: &ChuObject,
    b: &ChuObject,
    max_level: usize,
    cfg: &OptimizerConfig,
    tol: f64,
) -> Result<MorphismCheck> {
    let (f, g) = (&m.forward, &m.backward);
    let aligned = f.domain.dim() == a.left.dim()
        && f.codomain.dim() == b.left.dim()
        && g.domain.dim() == b.right.dim()
        && g.codomain.dim() == a.right.dim();
    if !aligned {
        return Err(Error::Dimension("morphism components do not match the objects".into()));
    }
    // d₂(f e_c, e_e) = (Fᵀ D₂)[c, e] and d₁(e_c, g e_e) = (D₁ G)[c, e]
    let lhs = &f.coeffs.transpose() * &b.pairing_matrix();
    let rhs = &a.pairing_matrix() * &g.coeffs;
    let mut defect = 0.0;
    let mut witness = (0, 0);
    for c in 0..lhs.rows() {
        for e in 0..lhs.cols() {
            let dev = (lhs[(c, e)] - rhs[(c, e)]).norm();
            if dev > defect {
                defect = dev;
                witness = (c, e);
            }
        }
    }
    let transpose_defect = match (a.hs_order(), b.hs_order()) {
        (Some(d1), Some(d2)) => Some(hs_transpose_defect(f, g, d1, d2)?),
        _ => None,
    };
    let forward = is_complete_contraction(f, max_level, cfg, tol)?;
    let backward = is_complete_contraction(g, max_level, cfg, tol)?;
    let exact_ok = defect <= EXACT_TOL && transpose_defect.is_none_or(|t| t <= EXACT_TOL);
    let verdict = if exact_ok {
        forward.verdict.and(backward.verdict)
    } else {
        Verdict::Fails
    };
    Ok(MorphismCheck {
        label: "a morphism is a pair of complete contractions adjoint under the pairings".into(),
        adjointness_defect: defect,
        adjointness_witness: witness,
        transpose_defect,
        forward,
        backward,
        verdict,
    })
}

/// Coefficient distance between `g` and the transpose of `f` read as a
/// superoperator on trace classes.
fn hs_transpose_defect(f: &CbMap, g: &CbMap, d1: usize, d2: usize) -> Result<f64> {
    let mut superop = CMatrix::zeros(d2 * d2, d1 * d1);
    for (p, q) in (0..d2).flat_map(|p| (0..d2).map(move |q| (p, q))) {
        for (i, j) in (0..d1).flat_map(|i| (0..d1).map(move |j| (i, j))) {
            superop[(p + q * d2, i + j * d1)] = f.coeffs[(p * d2 + q, i * d1 + j)];
        }
    }
    let ft = Channel::new(d1, d2, Picture::Schrodinger, superop)?.transpose().to_cbmap();
    Ok(ft.coeffs.max_abs_diff(&g.coeffs))
}

/// The spatial tensor of two HS objects together with the coordinate maps
/// identifying both sides with those of `hs_object(d₁d₂)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TensorHs {
    pub object: ChuObject,
    /// `T_{d₁} ⊗̂ T_{d₂} → T_{d₁d₂}`.
    pub t_map: CbMap,
    /// `M_{d₁} ⊗ M_{d₂}` (Kronecker basis) `→ M_{d₁d₂}`.
    pub b_map: CbMap,
    /// `max |tr'(x⊗y, a⊗b) − tr(xa) tr(yb)|` over full bases.
    pub pairing_defect: f64,
}

/// Position of `e_ij ⊗ e_kl` in the row-major coordinates of the order
/// `d₁d₂` matrix units: row `i·d₂+k`, column `j·d₂+l`.
fn kron_index(d1: usize, d2: usize, a: usize, b: usize) -> usize {
    let (i, j, k, l) = (a / d1, a % d1, b / d2, b % d2);
    let n = d1 * d2;
    (i * d2 + k) * n + j * d2 + l
}

pub fn tensor_hs(a: &ChuObject, b: &ChuObject) -> Result<TensorHs> {
    let (Some(d1), Some(d2)) = (a.hs_order(), b.hs_order()) else {
        return Err(Error::NotHsObject);
    };
    let n = d1 * d2;
    let (m1, m2) = (d1 * d1, d2 * d2);
    let perm = CMatrix::from_fn(n * n, m1 * m2, |r, c| {
        if kron_index(d1, d2, c / m2, c % m2) == r {
            ONE
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let object = hs_object(n);
    let t_map = CbMap::new(proj_tensor(trace_class(d1), trace_class(d2)), trace_class(n), perm.clone())?;
    let kron_basis = (0..m1 * m2)
        .map(|c| {
            let (x, y) = (c / m2, c % m2);
            kron(&CMatrix::unit(d1, d1, x / d1, x % d1), &CMatrix::unit(d2, d2, y / d2, y % d2))
        })
        .collect();
    let b_map = CbMap::new(concrete(n, n, kron_basis)?, matrix_space(n), perm)?;

    let big = object.pairing_matrix();
    let (p1, p2) = (a.pairing_matrix(), b.pairing_matrix());
    let mut pairing_defect: f64 = 0.0;
    for x in 0..m1 * m2 {
        let tx = kron_index(d1, d2, x / m2, x % m2);
        for y in 0..m1 * m2 {
            let by = kron_index(d1, d2, y / m2, y % m2);
            let want = p1[(x / m2, y / m2)] * p2[(x % m2, y % m2)];
            pairing_defect = pairing_defect.max((big[(tx, by)] - want).norm());
        }
    }
    Ok(TensorHs {
        object,
        t_map,
        b_map,
        pairing_defect,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumKind {
    /// `ℓ¹` on the left, `ℓ∞` on the right.
    Plus,
    /// `ℓ∞` on the left, `ℓ¹` on the right.
    With,
}

/// Block-diagonal pairing `d((x₁,x₂),(y₁,y₂)) = d_a(x₁,y₁) + d_b(x₂,y₂)`.
pub fn additive_sum(a: &ChuObject, b: &ChuObject, kind: SumKind) -> ChuObject {
    let (pa, pb) = (a.pairing_matrix(), b.pairing_matrix());
    let m = CMatrix::from_fn(pa.rows() + pb.rows(), pa.cols() + pb.cols(), |r, c| {
        match (r.checked_sub(pa.rows()), c.checked_sub(pa.cols())) {
            (None, None) => pa[(r, c)],
            (Some(r2), Some(c2)) => pb[(r2, c2)],
            _ => C64::new(0.0, 0.0),
        }
    });
    let lefts = vec![a.left.clone(), b.left.clone()];
    let rights = vec![a.right.clone(), b.right.clone()];
    let (left, right) = match kind {
        SumKind::Plus => (direct_sum_1(lefts), direct_sum_inf(rights)),
        SumKind::With => (direct_sum_inf(lefts), direct_sum_1(rights)),
    };
    from_pairing_matrix(left, right, &m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    fn flip(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connective {
    Tensor,
    Par,
    Plus,
    With,
}

impl Connective {
    fn symbol(self) -> &'static str {
        match self {
            Connective::Tensor => "⊗",
            Connective::Par => "⅋",
            Connective::Plus => "⊕",
            Connective::With => "&",
        }
    }

    fn operand_polarity(self) -> Polarity {
        match self {
            Connective::Tensor | Connective::Plus => Polarity::Positive,
            Connective::Par | Connective::With => Polarity::Negative,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Atom { name: String, dim: usize, position: usize },
    Dual(Box<Formula>),
    Binary { op: Connective, left: Box<Formula>, right: Box<Formula>, position: usize },
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Formula::Atom { name, dim, .. } => write!(f, "{name}:{dim}"),
            Formula::Dual(a) => match **a {
                Formula::Binary { .. } => write!(f, "({a})~"),
                _ => write!(f, "{a}~"),
            },
            Formula::Binary { op, left, right, .. } => write!(f, "({left} {} {right})", op.symbol()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    // a connective in ASCII or in the printed Unicode form, with its byte length
    fn connective(&mut self) -> Option<(Connective, usize)> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        [
            ("*", Connective::Tensor),
            ("⊗", Connective::Tensor),
            ("%", Connective::Par),
            ("⅋", Connective::Par),
            ("+", Connective::Plus),
            ("⊕", Connective::Plus),
            ("&", Connective::With),
        ]
        .into_iter()
        .find(|(sym, _)| rest.starts_with(sym.as_bytes()))
        .map(|(sym, op)| (op, sym.len()))
    }

    fn binary_chain(&mut self, ops: [Connective; 2], next: fn(&mut Self) -> Result<Formula>) -> Result<Formula> {
        let mut lhs = next(self)?;
        while let Some((op, len)) = self.connective().filter(|(op, _)| ops.contains(op)) {
            let position = self.pos;
            self.pos += len;
            let rhs = next(self)?;
            lhs = Formula::Binary { op, left: Box::new(lhs), right: Box::new(rhs), position };
        }
        Ok(lhs)
    }

    // additive := multiplicative (('+' | '&') multiplicative)*
    fn additive(&mut self) -> Result<Formula> {
        self.binary_chain([Connective::Plus, Connective::With], Self::multiplicative)
    }

    // multiplicative := postfix (('*' | '%') postfix)*
    fn multiplicative(&mut self) -> Result<Formula> {
        self.binary_chain([Connective::Tensor, Connective::Par], Self::postfix)
    }

    fn postfix(&mut self) -> Result<Formula> {
        let mut f = self.primary()?;
        while self.peek() == Some(b'~') {
            self.pos += 1;
            f = Formula::Dual(Box::new(f));
        }
        Ok(f)
    }

    fn primary(&mut self) -> Result<Formula> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let f = self.additive()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(f)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let position = self.pos;
                while self.src.get(self.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_') {
                    self.pos += 1;
                }
                let name = String::from_utf8_lossy(&self.src[position..self.pos]).into_owned();
                if self.src.get(self.pos) != Some(&b':') {
                    return self.err("expected ':' followed by a dimension after the atom name");
                }
                self.pos += 1;
                let start = self.pos;
                while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                    self.pos += 1;
                }
                let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                let dim: usize = match digits.parse() {
                    Ok(d) if d >= 1 => d,
                    _ => {
                        self.pos = start;
                        return self.err("expected a positive dimension");
                    }
                };
                atom_polarity(&name).ok_or(Error::Parse {
                    position,
                    message: format!("atom '{name}' must start with P or R (positive) or N or M (negative)"),
                })?;
                Ok(Formula::Atom { name, dim, position })
            }
            Some(_) => self.err("unexpected character"),
            None => self.err("unexpected end of formula"),
        }
    }
}

fn atom_polarity(name: &str) -> Option<Polarity> {
    match name.as_bytes().first()? {
        b'P' | b'R' => Some(Polarity::Positive),
        b'N' | b'M' => Some(Polarity::Negative),
        _ => None,
    }
}

pub fn parse_formula(src: &str) -> Result<Formula> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let f = p.additive()?;
    if p.peek().is_some() {
        return p.err("unexpected trailing input");
    }
    Ok(f)
}

/// Polarity of a well-polarized formula.
pub fn polarity(f: &Formula) -> Result<Polarity> {
    match f {
        Formula::Atom { name, .. } => Ok(atom_polarity(name).expect("checked by the parser")),
        Formula::Dual(a) => Ok(polarity(a)?.flip()),
        Formula::Binary { op, left, right, position } => {
            let want = op.operand_polarity();
            for (side, g) in [("left", left), ("right", right)] {
                let got = polarity(g)?;
                if got != want {
                    return Err(Error::IllPolarized(format!(
                        "{} at position {position} needs {want:?} operands but its {side} operand is {got:?}",
                        op.symbol()
                    )
                    .to_lowercase()));
                }
            }
            Ok(want)
        }
    }
}

/// Compositional interpretation of a well-polarized formula.
pub fn interpret(f: &Formula) -> Result<ChuObject> {
    polarity(f)?;
    interpret_checked(f)
}

fn interpret_checked(f: &Formula) -> Result<ChuObject> {
    Ok(match f {
        Formula::Atom { name, dim, .. } => match atom_polarity(name) {
            Some(Polarity::Positive) => hs_object(*dim),
            _ => dual(&hs_object(*dim)),
        },
        Formula::Dual(a) => dual(&interpret_checked(a)?),
        Formula::Binary { op, left, right, .. } => {
            let (a, b) = (interpret_checked(left)?, interpret_checked(right)?);
            match op {
                Connective::Tensor => tensor_hs(&a, &b)?.object,
                Connective::Par => dual(&tensor_hs(&dual(&a), &dual(&b))?.object),
                Connective::Plus => additive_sum(&a, &b, SumKind::Plus),
                Connective::With => additive_sum(&a, &b, SumKind::With),
            }
        }
    })
}

/// One row of the correspondence between pictures, operator spaces and
/// polarized formulas.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TableRow {
    pub picture: Picture,
    pub role: String,
    pub space: String,
    pub formula: String,
}

fn table_row(f: &Formula, pol: Polarity) -> TableRow {
    let (picture, side) = match pol {
        Polarity::Positive => (Picture::Schrodinger, "T"),
        Polarity::Negative => (Picture::Heisenberg, "B"),
    };
    let (role, space, formula) = match f {
        Formula::Binary { op: op @ (Connective::Tensor | Connective::Par), .. } => {
            let (a, b) = if pol == Polarity::Positive { ("P", "R") } else { ("N", "M") };
            let t = if *op == Connective::Tensor { "⊗̂" } else { "⊗̄" };
            (
                "quantum composition",
                format!("{side}(H_{a}) {t} {side}(H_{b}) ≅ {side}(H_{a} ⊗ H_{b})"),
                format!("{a} {} {b}", op.symbol()),
            )
        }
        Formula::Binary { op, .. } => {
            let (a, b, s) = if pol == Polarity::Positive { ("P", "R", "⊕¹") } else { ("N", "M", "⊕^∞") };
            ("classical composition", format!("{side}(H_{a}) {s} {side}(H_{b})"), format!("{a} {} {b}", op.symbol()))
        }
        _ => {
            let a = if pol == Polarity::Positive { "P" } else { "N" };
            ("system description", format!("{side}(H_{a})"), a.to_string())
        }
    };
    TableRow {
        picture,
        role: role.into(),
        space,
        formula,
    }
}

/// Short human-readable name of a space built by this module.
pub fn describe(space: &OperatorSpace) -> String {
    if let Some(d) = space.trace_class_order() {
        return format!("T({d})");
    }
    if let Some(d) = space.matrix_order() {
        return format!("B({d})");
    }
    match space {
        OperatorSpace::Sum1 { parts } => parts.iter().map(describe).collect::<Vec<_>>().join(" ⊕¹ "),
        OperatorSpace::SumInf { parts } => parts.iter().map(describe).collect::<Vec<_>>().join(" ⊕^∞ "),
        other => other.kind_name().to_string(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolarityReport {
    pub formula: String,
    pub polarity: Polarity,
    pub left: String,
    pub right: String,
    pub left_dim: usize,
    pub right_dim: usize,
    pub row: TableRow,
    pub object: ChuObject,
}

pub fn polarity_report(src: &str) -> Result<PolarityReport> {
    let f = parse_formula(src)?;
    let pol = polarity(&f)?;
    let object = interpret_checked(&f)?;
    Ok(PolarityReport {
        formula: f.to_string(),
        polarity: pol,
        left: describe(&object.left),
        right: describe(&object.right),
        left_dim: object.left.dim(),
        right_dim: object.right.dim(),
        row: table_row(&f, pol),
        object,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::{gaussian_matrix, rng_for};

    #[test]
    fn hs_pairing_values() {
        let h = hs_object(2);
        let ket0 = CMatrix::unit(2, 2, 0, 0);
        let z = CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        assert!((h.pair(ket0.data(), z.data()) - ONE).norm() < 1e-15);
        let h1 = hs_object(1);
        assert_eq!(h1.pair(&[C64::new(2.0, 0.0)], &[C64::new(3.0, 0.0)]), C64::new(6.0, 0.0));
        assert_eq!(h.hs_order(), Some(2));
        assert_eq!(dual(&h).hs_order(), None);
    }

    #[test]
    fn dual_is_involution() {
        let h = hs_object(2);
        assert_eq!(dual(&dual(&h)), h);
        let s = additive_sum(&h, &hs_object(1), SumKind::Plus);
        assert_eq!(dual(&dual(&s)), s);
        let mut rng = rng_for(1, 0);
        let x = gaussian_matrix(&mut rng, 2, 2);
        let y = gaussian_matrix(&mut rng, 2, 2);
        assert!((dual(&h).pair(y.data(), x.data()) - h.pair(x.data(), y.data())).norm() < 1e-14);
    }

    #[test]
    fn with_is_dual_of_plus_of_duals() {
        let (a, b) = (hs_object(2), hs_object(1));
        let w = additive_sum(&a, &b, SumKind::With);
        assert_eq!(w, dual(&additive_sum(&dual(&a), &dual(&b), SumKind::Plus)));
    }

    #[test]
    fn classical_bit() {
        let bit = additive_sum(&hs_object(1), &hs_object(1), SumKind::Plus);
        assert_eq!(describe(&bit.left), "T(1) ⊕¹ T(1)");
        assert_eq!(describe(&bit.right), "B(1) ⊕^∞ B(1)");
        assert_eq!(bit.pairing_matrix(), CMatrix::identity(2));
    }

    #[test]
    fn tensor_of_hs_objects() {
        let t = tensor_hs(&hs_object(2), &hs_object(2)).unwrap();
        assert_eq!(t.object, hs_object(4));
        assert!(t.pairing_defect < 1e-15);
        let t1 = tensor_hs(&hs_object(1), &hs_object(3)).unwrap();
        assert_eq!(t1.object, hs_object(3));
        assert!(matches!(tensor_hs(&dual(&hs_object(2)), &hs_object(2)), Err(Error::NotHsObject)));
    }

    #[test]
    fn channel_morphisms() {
        let cfg = OptimizerConfig::with_seed(2).restarts(1);
        let mut rng = rng_for(3, 0);
        let phi = Channel::random_cptp(&mut rng, 2, 2, 2).unwrap();
        let m = ChuMorphism::from_channel(&phi).unwrap();
        let h = hs_object(2);
        let ok = morphism_valid(&m, &h, &h, 2, &cfg, 1e-6).unwrap();
        assert_eq!(ok.verdict, Verdict::Holds, "{ok:?}");
        assert!(ok.adjointness_defect < 1e-12);

        let mut bad = m.clone();
        bad.backward.coeffs[(1, 2)] += C64::new(0.05, 0.0);
        let no = morphism_valid(&bad, &h, &h, 2, &cfg, 1e-6).unwrap();
        assert_eq!(no.verdict, Verdict::Fails);
        assert!(no.adjointness_defect > 0.01);

        let d = morphism_valid(&dual_morphism(&m), &dual(&h), &dual(&h), 2, &cfg, 1e-6).unwrap();
        assert_eq!(d.verdict, Verdict::Holds);
        assert!(morphism_valid(&m, &hs_object(3), &h, 1, &cfg, 1e-6).is_err());
    }

    #[test]
    fn parser_and_polarity() {
        let f = parse_formula("(P:2 * R:2) + N:3~").unwrap();
        assert_eq!(polarity(&f).unwrap(), Polarity::Positive);
        assert_eq!(f.to_string(), "((P:2 ⊗ R:2) ⊕ N:3~)");
        match parse_formula("P:2 * ") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 6),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_formula("X:2"), Err(Error::Parse { position: 0, .. })));
        assert!(matches!(parse_formula("P:0"), Err(Error::Parse { position: 2, .. })));
        match polarity(&parse_formula("P:2 % R:2").unwrap()) {
            Err(Error::IllPolarized(msg)) => assert!(msg.contains('⅋'), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn six_rows() {
        let cases = [
            ("P:2", "system description", Picture::Schrodinger, "T(2)", "B(2)"),
            ("P:2 * R:2", "quantum composition", Picture::Schrodinger, "T(4)", "B(4)"),
            ("P:2 + R:2", "classical composition", Picture::Schrodinger, "T(2) ⊕¹ T(2)", "B(2) ⊕^∞ B(2)"),
            ("N:2", "system description", Picture::Heisenberg, "B(2)", "T(2)"),
            ("N:2 % M:2", "quantum composition", Picture::Heisenberg, "B(4)", "T(4)"),
            ("N:2 & M:2", "classical composition", Picture::Heisenberg, "B(2) ⊕^∞ B(2)", "T(2) ⊕¹ T(2)"),
        ];
        for (src, role, pic, left, right) in cases {
            let r = polarity_report(src).unwrap();
            assert_eq!(r.row.role, role);
            assert_eq!(r.row.picture, pic);
            assert_eq!((r.left.as_str(), r.right.as_str()), (left, right), "{src}");
        }
        assert_eq!(polarity_report("N:2 % M:2").unwrap().object, dual(&hs_object(4)));
    }
}
