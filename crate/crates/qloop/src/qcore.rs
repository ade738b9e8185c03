//! Scalars and spectral parameters, plus graded basis spaces with dense operators on them.

use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// The deformation datum. All powers of q go through `hbar`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QScalar {
    hbar: C64,
}

impl QScalar {
    pub fn new(hbar: C64) -> Result<Self> {
        let q = hbar.exp();
        let bad = |z: C64| (q - z).norm() < 1e-12;
        if !q.is_finite() || q.norm() < 1e-300 || bad(C64::new(1.0, 0.0)) || bad(C64::new(-1.0, 0.0)) {
            return Err(Error::InvalidParameter(format!("q = exp({hbar}) is 0 or +-1")));
        }
        Ok(Self { hbar })
    }

    pub fn hbar(&self) -> C64 {
        self.hbar
    }

    pub fn q(&self) -> C64 {
        self.hbar.exp()
    }

    /// q^nu = exp(hbar nu).
    pub fn pow(&self, nu: C64) -> C64 {
        (self.hbar * nu).exp()
    }

    pub fn powf(&self, nu: f64) -> C64 {
        (self.hbar * nu).exp()
    }

    pub fn kappa(&self) -> C64 {
        self.powf(1.0) - self.powf(-1.0)
    }

    /// The q-number [nu]_q.
    pub fn qnum(&self, nu: C64) -> C64 {
        (self.pow(nu) - self.pow(-nu)) / self.kappa()
    }
}

pub fn qnum(qs: &QScalar, nu: C64) -> C64 {
    qs.qnum(nu)
}

pub fn kappa(qs: &QScalar) -> C64 {
    qs.kappa()
}

/// A spectral parameter zeta = q^u, stored through u.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub u: C64,
}

impl SpectralPoint {
    pub fn new(u: C64) -> Self {
        Self { u }
    }

    /// The point q^{a} zeta.
    pub fn shifted(&self, a: C64) -> Self {
        Self { u: self.u + a }
    }

    pub fn zeta(&self, qs: &QScalar) -> C64 {
        qs.pow(self.u)
    }
}

/// zeta^a evaluated as exp(hbar u a).
pub fn zeta_pow(qs: &QScalar, pt: SpectralPoint, a: C64) -> C64 {
    qs.pow(pt.u * a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grading {
    pub s0: u32,
    pub s1: u32,
}

impl Default for Grading {
    fn default() -> Self {
        Self { s0: 1, s1: 1 }
    }
}

impl Grading {
    pub fn new(s0: u32, s1: u32) -> Result<Self> {
        if s0 == 0 || s1 == 0 {
            return Err(Error::InvalidParameter("grading indices must be positive".into()));
        }
        Ok(Self { s0, s1 })
    }

    pub fn s(&self) -> u32 {
        self.s0 + self.s1
    }

    pub fn sf(&self) -> f64 {
        self.s() as f64
    }

    pub fn si(&self, i: usize) -> f64 {
        if i == 0 {
            self.s0 as f64
        } else {
            self.s1 as f64
        }
    }
}

/// Cutoff and tolerance settings. When `tail_bound_required` is set, chain
/// operators are built from truncated numeric traces with geometric tail bounds;
/// otherwise traces are evaluated in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub n_max: usize,
    pub tol: f64,
    pub tail_bound_required: bool,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { n_max: 40, tol: 1e-8, tail_bound_required: false }
    }
}

impl TruncationPolicy {
    pub fn new(n_max: usize, tol: f64) -> Result<Self> {
        if n_max < 2 || !(tol > 0.0) {
            return Err(Error::InvalidParameter("need n_max >= 2 and tol > 0".into()));
        }
        Ok(Self { n_max, tol, tail_bound_required: false })
    }
}

/// Eigenvalue exponents of the two Cartan generators on a basis vector. For
/// U_q(sl2) modules `h1` holds the H eigenvalue and for oscillator modules the
/// N eigenvalue; `h0` is then the negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub h0: C64,
    pub h1: C64,
}

impl Weight {
    pub fn from_h1(h1: C64) -> Self {
        Self { h0: -h1, h1 }
    }
}

impl std::ops::Add for Weight {
    type Output = Weight;
    fn add(self, o: Weight) -> Weight {
        Weight { h0: self.h0 + o.h0, h1: self.h1 + o.h1 }
    }
}

/// Distance value used for labels that are not near any truncation edge.
pub const FAR: usize = usize::MAX / 4;

/// An ordered basis with weights. Labels are tuples of integers, one entry per
/// tensor factor. `edge` records, per basis vector, how many raising or lowering
/// steps separate it from a truncation cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpace {
    pub labels: Vec<Vec<i64>>,
    pub weights: Vec<Weight>,
    pub edge: Vec<usize>,
}

impl BasisSpace {
    /// Finite space with labels 0..weights.len().
    pub fn finite(weights: Vec<Weight>) -> Self {
        let n = weights.len();
        Self { labels: (0..n as i64).map(|i| vec![i]).collect(), weights, edge: vec![FAR; n] }
    }

    /// Labels lo..=hi; truncation edges are marked at the ends flagged true.
    pub fn range(lo: i64, hi: i64, weights: Vec<Weight>, lo_cut: bool, hi_cut: bool) -> Self {
        assert_eq!(weights.len() as i64, hi - lo + 1);
        let labels = (lo..=hi).map(|n| vec![n]).collect();
        let edge = (lo..=hi)
            .map(|n| {
                let a = if lo_cut { (n - lo) as usize } else { FAR };
                let b = if hi_cut { (hi - n) as usize } else { FAR };
                a.min(b)
            })
            .collect();
        Self { labels, weights, edge }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn is_truncated(&self) -> bool {
        self.edge.iter().any(|&e| e < FAR)
    }

    /// Indices at distance at least `k` from every cutoff.
    pub fn interior(&self, k: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.edge[i] >= k).collect()
    }

    pub fn index_of(&self, label: &[i64]) -> Option<usize> {
        self.labels.iter().position(|l| l.as_slice() == label)
    }

    pub fn tensor(&self, other: &BasisSpace) -> BasisSpace {
        let mut labels = Vec::with_capacity(self.dim() * other.dim());
        let mut weights = Vec::with_capacity(self.dim() * other.dim());
        let mut edge = Vec::with_capacity(self.dim() * other.dim());
        for i in 0..self.dim() {
            for j in 0..other.dim() {
                let mut l = self.labels[i].clone();
                l.extend_from_slice(&other.labels[j]);
                labels.push(l);
                weights.push(self.weights[i] + other.weights[j]);
                edge.push(self.edge[i].min(other.edge[j]));
            }
        }
        BasisSpace { labels, weights, edge }
    }

    /// Diagonal matrix of q^{nu h1}.
    pub fn cartan_h1(&self, qs: &QScalar, nu: C64) -> DMatrix<C64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.weights.iter().map(|w| qs.pow(nu * w.h1)),
        ))
    }

    pub fn cartan_h0(&self, qs: &QScalar, nu: C64) -> DMatrix<C64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim(),
            self.weights.iter().map(|w| qs.pow(nu * w.h0)),
        ))
    }
}

/// A dense operator between basis spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct LinOp {
    pub domain: BasisSpace,
    pub codomain: BasisSpace,
    pub mat: DMatrix<C64>,
}

impl LinOp {
    pub fn new(domain: BasisSpace, codomain: BasisSpace, mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != codomain.dim() || mat.ncols() != domain.dim() {
            return Err(Error::DimensionMismatch(format!(
                "matrix {}x{} vs spaces {}x{}",
                mat.nrows(),
                mat.ncols(),
                codomain.dim(),
                domain.dim()
            )));
        }
        Ok(Self { domain, codomain, mat })
    }

    pub fn square(space: BasisSpace, mat: DMatrix<C64>) -> Result<Self> {
        Self::new(space.clone(), space, mat)
    }

    pub fn identity(space: BasisSpace) -> Self {
        let n = space.dim();
        Self { domain: space.clone(), codomain: space, mat: DMatrix::identity(n, n) }
    }

    /// self after other.
    pub fn compose(&self, other: &LinOp) -> Result<LinOp> {
        if self.domain.labels != other.codomain.labels {
            return Err(Error::DimensionMismatch("inner spaces differ".into()));
        }
        Ok(LinOp {
            domain: other.domain.clone(),
            codomain: self.codomain.clone(),
            mat: &self.mat * &other.mat,
        })
    }

    pub fn is_square(&self) -> bool {
        self.domain.labels == self.codomain.labels
    }

    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }
}

pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Tensor product of two operators, each square on its own space.
pub fn tensor(a: &LinOp, b: &LinOp) -> Result<LinOp> {
    if !a.is_square() || !b.is_square() {
        return Err(Error::DimensionMismatch("tensor needs square operators".into()));
    }
    let space = a.domain.tensor(&b.domain);
    Ok(LinOp { domain: space.clone(), codomain: space, mat: kron(&a.mat, &b.mat) })
}

/// Permutation matrix sending a (x) b to b (x) a, as a plain matrix.
pub fn swap_matrix(da: usize, db: usize) -> DMatrix<C64> {
    let mut p = DMatrix::zeros(da * db, da * db);
    for i in 0..da {
        for j in 0..db {
            p[(j * da + i, i * db + j)] = C64::new(1.0, 0.0);
        }
    }
    p
}

/// The flip operator V_A (x) V_B -> V_B (x) V_A.
pub fn swap(a: &BasisSpace, b: &BasisSpace) -> LinOp {
    LinOp { domain: a.tensor(b), codomain: b.tensor(a), mat: swap_matrix(a.dim(), b.dim()) }
}

/// Structured outcome of one residual check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub relation_id: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub residual: f64,
    pub tail_bound: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub components: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl RelationReport {
    pub fn new(relation_id: impl Into<String>, residual: f64, tail_bound: f64, tolerance: f64) -> Self {
        let verdict = if residual.is_finite() && residual <= tolerance.max(tail_bound) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            relation_id: relation_id.into(),
            parameters: BTreeMap::new(),
            residual,
            tail_bound,
            tolerance,
            verdict,
            components: BTreeMap::new(),
        }
    }

    /// Report whose residual is the largest component.
    pub fn from_components(
        relation_id: impl Into<String>,
        components: BTreeMap<String, f64>,
        tail_bound: f64,
        tolerance: f64,
    ) -> Self {
        let residual = components.values().fold(0.0f64, |m, &v| if v.is_nan() { f64::NAN } else { m.max(v) });
        let mut r = Self::new(relation_id, residual, tail_bound, tolerance);
        r.components = components;
        r
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn with_param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }

    pub fn with_complex(self, key: &str, z: C64) -> Self {
        self.with_param(key, [z.re, z.im])
    }
}

/// 1/z without forming |z|^2, so that it stays finite for |z| up to the largest float.
pub fn recip(z: C64) -> C64 {
    C64::from_polar(1.0 / z.norm(), -z.arg())
}

/// Relative residual of a sum of terms: |sum| / max |term|.
pub fn relative_residual(terms: &[DMatrix<C64>]) -> f64 {
    let mut sum = terms[0].clone();
    for t in &terms[1..] {
        sum += t;
    }
    let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        sum.norm() / scale
    }
}

/// Restrict a square matrix to the given row and column indices.
pub fn submatrix(m: &DMatrix<C64>, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}
