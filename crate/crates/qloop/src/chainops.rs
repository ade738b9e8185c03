//! Transfer matrices and Q-operators on twisted spin-1/2 chains.
//!
//! Operators over infinite-dimensional auxiliary spaces are built from L-operators
//! solved as q-difference operators, so the twisted trace over the auxiliary space
//! is a finite sum of geometric series evaluated in closed form. With
//! `TruncationPolicy::tail_bound_required` the same L-operators are materialized on
//! a truncated auxiliary space and traced numerically with a tail bound instead.

use crate::algebras::RepTable;
use crate::intertwiners::qdiff::{l_operator_support, materialize_l, solve_l_operator_on, AuxOp, SymModule, Unknown};
use crate::intertwiners::solve_intertwiner_allowing_rank_loss;
use crate::qcore::{BasisSpace, Grading, LinOp, QScalar, SpectralPoint, TruncationPolicy, Weight};
use crate::representations::{finite_dim_eval, ShiftWeight};
use crate::traces::truncated_partial_trace;
use crate::{cr, Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

/// An L-site chain of two-dimensional evaluation modules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub qs: QScalar,
    pub site_params: Vec<SpectralPoint>,
    pub twist_phi: C64,
    pub grading: Grading,
}

impl ChainSpec {
    /// Homogeneous chain with all inhomogeneities at u = 0.
    pub fn new(qs: QScalar, l: usize, twist_phi: C64, grading: Grading) -> Result<Self> {
        Self::with_sites(qs, vec![SpectralPoint::new(cr(0.0)); l], twist_phi, grading)
    }

    pub fn with_sites(qs: QScalar, site_params: Vec<SpectralPoint>, twist_phi: C64, grading: Grading) -> Result<Self> {
        if site_params.is_empty() || site_params.len() > 12 {
            return Err(Error::InvalidParameter("chain length must be between 1 and 12".into()));
        }
        Ok(Self { qs, site_params, twist_phi, grading })
    }

    pub fn len(&self) -> usize {
        self.site_params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.site_params.is_empty()
    }

    pub fn dim(&self) -> usize {
        1 << self.len()
    }

    /// Whether the Fock and Verma twisted traces converge as sums: |q^{-2 phi}| < 1.
    pub fn twist_converges(&self) -> bool {
        self.qs.pow(-2.0 * self.twist_phi).norm() < 1.0
    }

    /// The same chain with all spectral data moved by q^a.
    pub fn shifted(&self, a: C64) -> Self {
        Self { site_params: self.site_params.iter().map(|p| p.shifted(a)).collect(), ..self.clone() }
    }

    /// Total h1 eigenvalue of each basis vector; site 0 is the most significant bit and
    /// bit value 0 has weight +1.
    pub fn h1(&self) -> Vec<f64> {
        let l = self.len();
        (0..self.dim())
            .map(|i| (0..l).map(|k| if (i >> (l - 1 - k)) & 1 == 0 { 1.0 } else { -1.0 }).sum())
            .collect()
    }

    pub fn space(&self) -> BasisSpace {
        BasisSpace::finite(self.h1().into_iter().map(|w| Weight::from_h1(cr(w))).collect())
    }

    /// Diagonal operator f(h1) on the chain.
    pub fn diagonal(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_iterator(self.dim(), self.h1().into_iter().map(f)))
    }

    /// q^{nu h1} on the chain.
    pub fn cartan(&self, nu: C64) -> DMatrix<C64> {
        let qs = self.qs;
        self.diagonal(|w| qs.pow(nu * w))
    }
}

/// Auxiliary representation families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxFamily {
    Verma(C64),
    Finite(u32),
    RhoPlus,
    RhoBarMinus,
    ShiftedRhoPlus(ShiftWeight),
}

impl AuxFamily {
    fn module(&self, qs: &QScalar, x: C64, g: Grading) -> Result<SymModule> {
        Ok(match *self {
            AuxFamily::Verma(mu) => SymModule::verma(qs, mu, x, g),
            AuxFamily::RhoPlus => SymModule::rho_plus(qs, x, g),
            AuxFamily::RhoBarMinus => SymModule::rho_bar_minus(qs, x, g),
            AuxFamily::ShiftedRhoPlus(xi) => SymModule::rho_plus(qs, x, g).shifted(xi),
            AuxFamily::Finite(_) => return Err(Error::Incompatible("finite modules are handled densely".into())),
        })
    }
}

/// Per-site scalar normalization of solved L-operators, as a function of the
/// spectral argument u - u_site.
pub trait SiteNormalization: Sync {
    fn site_factor(&self, family: &AuxFamily, x: C64) -> Result<C64>;
}

/// L-operators and R-operators normalized by their top-corner entry only.
#[derive(Clone, Copy, Debug, Default)]
pub struct TopCorner;

impl SiteNormalization for TopCorner {
    fn site_factor(&self, _: &AuxFamily, _: C64) -> Result<C64> {
        Ok(cr(1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    TTilde,
    TFinite,
    TMu,
    Q,
    QBar,
    QShifted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorMeta {
    pub family: Family,
    pub params: BTreeMap<String, [f64; 2]>,
    pub tail_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOperator {
    pub matrix: LinOp,
    pub meta: OperatorMeta,
}

impl ChainOperator {
    fn new(chain: &ChainSpec, mat: DMatrix<C64>, family: Family, tail_bound: f64) -> Self {
        let space = chain.space();
        let mut params = BTreeMap::new();
        params.insert("phi".to_string(), [chain.twist_phi.re, chain.twist_phi.im]);
        params.insert("L".to_string(), [chain.len() as f64, 0.0]);
        Self { matrix: LinOp { domain: space.clone(), codomain: space, mat }, meta: OperatorMeta { family, params, tail_bound } }
    }

    fn param(mut self, key: &str, z: C64) -> Self {
        self.meta.params.insert(key.to_string(), [z.re, z.im]);
        self
    }

    pub fn mat(&self) -> &DMatrix<C64> {
        &self.matrix.mat
    }

    pub fn tail(&self) -> f64 {
        self.meta.tail_bound
    }
}

/// Reference spectral argument at which the q-power support of L-operators is found.
const SUPPORT_REFERENCE: C64 = C64::new(0.3, 0.17);
const NULL_TOL: f64 = 1e-9;

type SupportKey = (String, [u64; 2], u32, u32);

/// Supports depend only on the family, q and the grading, so they are found once per process.
fn cached_support(family: &AuxFamily, qs: &QScalar, g: Grading) -> Result<Vec<Unknown>> {
    static CACHE: OnceLock<Mutex<HashMap<SupportKey, Vec<Unknown>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let h = qs.hbar();
    let key = (format!("{family:?}"), [h.re.to_bits(), h.im.to_bits()], g.s0, g.s1);
    if let Some(s) = cache.lock().expect("support cache").get(&key) {
        return Ok(s.clone());
    }
    let support = l_operator_support(&family.module(qs, SUPPORT_REFERENCE, g)?, NULL_TOL)?;
    cache.lock().expect("support cache").insert(key, support.clone());
    Ok(support)
}

/// The L-operator of an auxiliary family at spectral argument x, as q-difference blocks.
pub fn site_l_operator(family: &AuxFamily, qs: &QScalar, x: C64, g: Grading) -> Result<crate::intertwiners::qdiff::SymLOperator> {
    let m = family.module(qs, x, g)?;
    solve_l_operator_on(&m, &cached_support(family, qs, g)?, NULL_TOL)
}

/// Monodromy L_{L-1} ... L_0 as a 2^L x 2^L array of auxiliary q-difference operators.
fn symbolic_monodromy(qs: &QScalar, sites: &[[[AuxOp; 2]; 2]]) -> Vec<Vec<AuxOp>> {
    let l = sites.len();
    let dim = 1usize << l;
    let mut m: Vec<Vec<AuxOp>> = (0..dim).map(|i| (0..dim).map(|j| if i == j { AuxOp::one() } else { AuxOp::zero() }).collect()).collect();
    for (k, lk) in sites.iter().enumerate() {
        let bit = l - 1 - k;
        let mut next: Vec<Vec<AuxOp>> = vec![vec![AuxOp::zero(); dim]; dim];
        for i in 0..dim {
            let c_ = (i >> bit) & 1;
            for j in 0..dim {
                if m[i][j].is_zero() {
                    continue;
                }
                for a in 0..2 {
                    if lk[a][c_].is_zero() {
                        continue;
                    }
                    let i2 = (i & !(1 << bit)) | (a << bit);
                    let y = lk[a][c_].mul(&m[i][j], qs);
                    next[i2][j].add_assign(&y, cr(1.0));
                }
            }
        }
        m = next;
    }
    m
}

/// Dense monodromy on aux (x) chain with index n 2^L + I, from per-site operators on
/// aux (x) C^2 with index 2n + a.
pub fn dense_monodromy(sites: &[DMatrix<C64>], aux_dim: usize) -> DMatrix<C64> {
    let l = sites.len();
    let dq = 1usize << l;
    let n = aux_dim * dq;
    let mut m = DMatrix::<C64>::identity(n, n);
    for (k, lk) in sites.iter().enumerate() {
        let bit = l - 1 - k;
        let mut next = DMatrix::<C64>::zeros(n, n);
        for col in 0..2 * aux_dim {
            let (n2, a2) = (col / 2, col % 2);
            for row in 0..2 * aux_dim {
                let v = lk[(row, col)];
                if v.norm() == 0.0 {
                    continue;
                }
                let (n1, a1) = (row / 2, row % 2);
                for rest in 0..dq {
                    if (rest >> bit) & 1 != 0 {
                        continue;
                    }
                    let dst = n1 * dq + (rest | (a1 << bit));
                    let src = n2 * dq + (rest | (a2 << bit));
                    for j in 0..n {
                        let x = m[(src, j)];
                        if x.norm() != 0.0 {
                            next[(dst, j)] += v * x;
                        }
                    }
                }
            }
        }
        m = next;
    }
    m
}

fn site_factor_product(norm: &dyn SiteNormalization, family: &AuxFamily, u: C64, chain: &ChainSpec) -> Result<C64> {
    let mut p = cr(1.0);
    for s in &chain.site_params {
        p *= norm.site_factor(family, u - s.u)?;
    }
    Ok(p)
}

/// Twisted trace over the auxiliary space of the monodromy of `family`, without
/// normalization factors. Returns the matrix and its tail bound.
pub fn aux_trace(family: &AuxFamily, u: C64, chain: &ChainSpec, policy: &TruncationPolicy) -> Result<(DMatrix<C64>, f64)> {
    let qs = chain.qs;
    let g = chain.grading;
    let phi = chain.twist_phi;
    if let AuxFamily::Finite(m) = family {
        return finite_trace(*m, u, chain);
    }
    let ls = chain
        .site_params
        .iter()
        .map(|s| site_l_operator(family, &qs, u - s.u, g).map(|l| l.blocks))
        .collect::<Result<Vec<_>>>()?;
    let module = family.module(&qs, u, g)?;
    let dim = chain.dim();
    if !policy.tail_bound_required {
        let mono = symbolic_monodromy(&qs, &ls);
        let mut out = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] = mono[i][j].twisted_trace(&qs, phi, module.w0, module.slope)?;
            }
        }
        return Ok((out, 0.0));
    }
    let n_max = policy.n_max;
    let dense: Vec<DMatrix<C64>> = ls.iter().map(|l| materialize_l(&qs, l, n_max)).collect();
    let mono = dense_monodromy(&dense, n_max + 1);
    let damping: Vec<C64> = (0..=n_max).map(|n| qs.pow(phi * (module.w0 + (module.slope as f64) * n as f64))).collect();
    let keep = (n_max + 1).saturating_sub(chain.len());
    if keep < 4 {
        return Err(Error::TruncationTooSmall(format!("n_max = {n_max} leaves no trace range for L = {}", chain.len())));
    }
    truncated_partial_trace(&mono, n_max + 1, keep, &damping)
}

fn finite_trace(m: u32, u: C64, chain: &ChainSpec) -> Result<(DMatrix<C64>, f64)> {
    let qs = chain.qs;
    let g = chain.grading;
    let dim = chain.dim();
    if m == 0 {
        return Ok((DMatrix::identity(dim, dim), 0.0));
    }
    let policy = TruncationPolicy::default();
    let site = finite_dim_eval(&qs, 1, SpectralPoint::new(cr(0.0)), g);
    let sites = chain
        .site_params
        .iter()
        .map(|s| {
            let aux = finite_dim_eval(&qs, m as usize, SpectralPoint::new(u - s.u), g);
            solve_intertwiner_allowing_rank_loss(&aux, &site, &policy).map(|sol| sol.r.mat)
        })
        .collect::<Result<Vec<_>>>()?;
    let na = m as usize + 1;
    let mono = dense_monodromy(&sites, na);
    let mut out = DMatrix::zeros(dim, dim);
    for n in 0..na {
        let tw = qs.pow(chain.twist_phi * (m as f64 - 2.0 * n as f64));
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] += mono[(n * dim + i, n * dim + j)] * tw;
            }
        }
    }
    Ok((out, 0.0))
}

/// Monodromy over a given auxiliary representation, evaluated at its own spectral
/// point, with chain sites at their inhomogeneities.
pub fn monodromy(aux: &RepTable, chain: &ChainSpec, policy: &TruncationPolicy) -> Result<LinOp> {
    let qs = chain.qs;
    let sites = chain
        .site_params
        .iter()
        .map(|s| {
            let site = finite_dim_eval(&qs, 1, *s, chain.grading);
            crate::intertwiners::l_operator(aux, &site, policy).map(|sol| sol.r.mat)
        })
        .collect::<Result<Vec<_>>>()?;
    let mat = dense_monodromy(&sites, aux.dim());
    let mut space = aux.space.clone();
    space = space.tensor(&chain.space());
    LinOp::new(space.clone(), space, mat)
}

/// T~_mu(zeta): trace over the evaluation Verma module.
pub fn transfer_t_tilde(
    mu: C64,
    pt: SpectralPoint,
    chain: &ChainSpec,
    policy: &TruncationPolicy,
    norm: &dyn SiteNormalization,
) -> Result<ChainOperator> {
    let fam = AuxFamily::Verma(mu);
    let (m, tail) = aux_trace(&fam, pt.u, chain, policy)?;
    let f = site_factor_product(norm, &fam, pt.u, chain)?;
    Ok(ChainOperator::new(chain, m * f, Family::TTilde, tail * f.norm()).param("mu", mu).param("u", pt.u))
}

/// T_m(zeta): trace over the (m+1)-dimensional evaluation module. T_0 is the identity.
pub fn transfer_t_finite(
    m: u32,
    pt: SpectralPoint,
    chain: &ChainSpec,
    norm: &dyn SiteNormalization,
) -> Result<ChainOperator> {
    let fam = AuxFamily::Finite(m);
    let (mat, _) = finite_trace(m, pt.u, chain)?;
    let f = if m == 0 { cr(1.0) } else { site_factor_product(norm, &fam, pt.u, chain)? };
    Ok(ChainOperator::new(chain, mat * f, Family::TFinite, 0.0).param("m", cr(m as f64)).param("u", pt.u))
}

/// T_mu = T~_mu - T~_{-mu-2}.
pub fn transfer_t_mu(
    mu: C64,
    pt: SpectralPoint,
    chain: &ChainSpec,
    policy: &TruncationPolicy,
    norm: &dyn SiteNormalization,
) -> Result<ChainOperator> {
    let a = transfer_t_tilde(mu, pt, chain, policy, norm)?;
    let b = transfer_t_tilde(-mu - 2.0, pt, chain, policy, norm)?;
    let mat = a.mat() - b.mat();
    Ok(ChainOperator::new(chain, mat, Family::TMu, a.tail() + b.tail()).param("mu", mu).param("u", pt.u))
}

fn q_like(
    fam: AuxFamily,
    family: Family,
    sign: f64,
    pt: SpectralPoint,
    chain: &ChainSpec,
    policy: &TruncationPolicy,
    norm: &dyn SiteNormalization,
) -> Result<ChainOperator> {
    let (m, tail) = aux_trace(&fam, pt.u, chain, policy)?;
    let f = site_factor_product(norm, &fam, pt.u, chain)?;
    let s = chain.grading.sf();
    let qs = chain.qs;
    let pre = chain.diagonal(|w| qs.pow(sign * pt.u * s * w / 4.0));
    let pre_max = pre.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(ChainOperator::new(chain, pre * m * f, family, tail * f.norm() * pre_max).param("u", pt.u))
}

/// Q(zeta) = zeta^{s h1 / 4} times the twisted trace over W^+ of the L-operator monodromy.
pub fn q_operator(pt: SpectralPoint, chain: &ChainSpec, policy: &TruncationPolicy, norm: &dyn SiteNormalization) -> Result<ChainOperator> {
    q_like(AuxFamily::RhoPlus, Family::Q, 1.0, pt, chain, policy, norm)
}

/// Q-bar(zeta) = zeta^{-s h1 / 4} times the twisted trace over W-bar^-.
pub fn q_bar_operator(pt: SpectralPoint, chain: &ChainSpec, policy: &TruncationPolicy, norm: &dyn SiteNormalization) -> Result<ChainOperator> {
    q_like(AuxFamily::RhoBarMinus, Family::QBar, -1.0, pt, chain, policy, norm)
}

/// Q-operator built from the shifted representation rho^+[xi].
pub fn q_operator_shifted(
    xi: ShiftWeight,
    pt: SpectralPoint,
    chain: &ChainSpec,
    policy: &TruncationPolicy,
    norm: &dyn SiteNormalization,
) -> Result<ChainOperator> {
    let op = q_like(AuxFamily::ShiftedRhoPlus(xi), Family::QShifted, 1.0, pt, chain, policy, norm)?;
    Ok(op.param("xi_h0", xi.xi_h0))
}

/// Eigenvalues sorted by real part, then imaginary part.
pub fn eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    let mut ev: Vec<C64> = m.clone().schur().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

/// Relative commutator norm |AB - BA| / (|A| |B|).
pub fn commutator_residual(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let d = a.norm() * b.norm();
    if d == 0.0 {
        0.0
    } else {
        (a * b - b * a).norm() / d
    }
}

/// Largest entry of an operator outside the blocks of equal total weight.
pub fn off_sector_norm(chain: &ChainSpec, m: &DMatrix<C64>) -> f64 {
    let h = chain.h1();
    let mut worst: f64 = 0.0;
    for i in 0..h.len() {
        for j in 0..h.len() {
            if (h[i] - h[j]).abs() > 0.5 {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst / m.norm().max(f64::MIN_POSITIVE)
}
