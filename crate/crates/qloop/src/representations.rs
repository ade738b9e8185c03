//! Concrete modules of U_q(sl2), the q-oscillator algebra, the loop algebra and its
//! Borel subalgebra, together with explicit isomorphisms between them.

use crate::algebras::{AlgebraTag, Gen, RepTable};
use crate::qcore::{recip, relative_residual, submatrix, BasisSpace, Grading, QScalar, RelationReport, SpectralPoint, TruncationPolicy, Weight};
use crate::{cr, Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A shift of Cartan weights; `xi_h0 = -xi_h1` is enforced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftWeight {
    pub xi_h0: C64,
    pub xi_h1: C64,
}

impl ShiftWeight {
    pub fn new(xi_h0: C64, xi_h1: C64) -> Result<Self> {
        if (xi_h0 + xi_h1).norm() > 1e-12 * (1.0 + xi_h0.norm()) {
            return Err(Error::InvalidParameter("shift weight needs xi(h0) = -xi(h1)".into()));
        }
        Ok(Self { xi_h0, xi_h1 })
    }

    pub fn from_h0(xi_h0: C64) -> Self {
        Self { xi_h0, xi_h1: -xi_h0 }
    }

    pub fn zero() -> Self {
        Self::from_h0(cr(0.0))
    }
}

/// Data of the representation U^{delta, gamma1, gamma2}: e1 u_n = zeta^{s1} c_n u_{n-1} with
/// c_n = gamma0 - gamma1 q^{-2n} - gamma2 q^{2n}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedRepSpec {
    pub delta: C64,
    pub gamma0: C64,
    pub gamma1: C64,
    pub gamma2: C64,
    pub zeta: SpectralPoint,
}

impl GeneralizedRepSpec {
    pub fn c_n(&self, qs: &QScalar, n: i64) -> C64 {
        let n = n as f64;
        self.gamma0 - self.gamma1 * qs.powf(-2.0 * n) - self.gamma2 * qs.powf(2.0 * n)
    }

    pub fn has_invariant_half(&self) -> bool {
        let scale = 1.0 + self.gamma0.norm() + self.gamma1.norm() + self.gamma2.norm();
        (self.gamma0 - self.gamma1 - self.gamma2).norm() <= 1e-12 * scale
    }
}

/// Which of the isomorphism classes a generalized representation falls into.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneralizedClass {
    ShiftedVerma,
    OscillatorPlus,
    OscillatorBarMinus,
}

fn raising(dim: usize, coef: impl Fn(i64) -> C64, lo: i64) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim.saturating_sub(1) {
        m[(k + 1, k)] = coef(lo + k as i64);
    }
    m
}

fn lowering(dim: usize, coef: impl Fn(i64) -> C64, lo: i64) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    for k in 1..dim {
        m[(k - 1, k)] = coef(lo + k as i64);
    }
    m
}

fn weights_h1(ns: impl Iterator<Item = i64>, h1: impl Fn(i64) -> C64) -> Vec<Weight> {
    ns.map(|n| Weight::from_h1(h1(n))).collect()
}

fn near_nonneg_integer(mu: C64) -> bool {
    mu.im.abs() < 1e-6 && mu.re > -1e-6 && (mu.re - mu.re.round()).abs() < 1e-6
}

/// The sl2 module with E v_n = (lambda + [n][mu-n+1]) v_{n-1}, F v_n = v_{n+1}, truncated to n <= n_max.
/// When lambda != 0 the vectors with n >= 0 do not span a submodule and n = 0 is a truncation edge.
pub fn verma_general(qs: &QScalar, mu: C64, lambda: C64, policy: &TruncationPolicy) -> RepTable {
    let n_max = policy.n_max as i64;
    let dim = policy.n_max + 1;
    let space = BasisSpace::range(0, n_max, weights_h1(0..=n_max, |n| mu - 2.0 * n as f64), lambda != cr(0.0), true);
    let coef = |n: i64| lambda + qs.qnum(cr(n as f64)) * qs.qnum(mu - n as f64 + 1.0);
    let mut rep = RepTable::new(format!("verma({mu},{lambda})"), AlgebraTag::Sl2, *qs, space)
        .with(Gen::E, lowering(dim, coef, 0))
        .with(Gen::F, raising(dim, |_| cr(1.0), 0))
        .param("mu", mu)
        .param("lambda", lambda);
    if lambda == cr(0.0) && near_nonneg_integer(mu) {
        rep.notes.push(format!("mu = {mu} is close to a non-negative integer; the module is reducible"));
    }
    rep
}

/// The highest weight module of weight mu.
pub fn highest_weight(qs: &QScalar, mu: C64, policy: &TruncationPolicy) -> RepTable {
    let mut r = verma_general(qs, mu, cr(0.0), policy);
    r.name = format!("highest_weight({mu})");
    r
}

/// The (m+1)-dimensional irreducible sl2 module.
pub fn finite_dim(qs: &QScalar, m: usize) -> RepTable {
    let dim = m + 1;
    let mf = m as f64;
    let space = BasisSpace::finite(weights_h1(0..=m as i64, |n| cr(mf - 2.0 * n as f64)));
    let coef = |n: i64| qs.qnum(cr(n as f64)) * qs.qnum(cr(mf - n as f64 + 1.0));
    RepTable::new(format!("finite_dim({m})"), AlgebraTag::Sl2, *qs, space)
        .with(Gen::E, lowering(dim, coef, 0))
        .with(Gen::F, raising(dim, |_| cr(1.0), 0))
        .param("m", cr(mf))
}

/// The E coefficient of the sl2 module of parameters (mu, lambda) at label n.
pub fn verma_coefficient(qs: &QScalar, mu: C64, lambda: C64, n: i64) -> C64 {
    lambda + qs.qnum(cr(n as f64)) * qs.qnum(mu - n as f64 + 1.0)
}

/// Conjugation residual between (mu0, lambda0) in the basis u_n = v_{n+k} and
/// (mu0 - 2k, lambda0 + [k][mu0 - k + 1]).
pub fn shift_isomorphism_check(
    qs: &QScalar,
    mu0: C64,
    lambda0: C64,
    k: i64,
    policy: &TruncationPolicy,
) -> Result<RelationReport> {
    if policy.n_max as i64 <= k.abs() + 2 {
        return Err(Error::TruncationTooSmall(format!("n_max must exceed |k| + 2 = {}", k.abs() + 2)));
    }
    let mu1 = mu0 - 2.0 * k as f64;
    let lambda1 = lambda0 + qs.qnum(cr(k as f64)) * qs.qnum(mu0 - k as f64 + 1.0);
    let a = verma_general(qs, mu0, lambda0, policy);
    let b = verma_general(qs, mu1, lambda1, policy);
    // the module with the larger label range is read from offset |k|
    let (big, small) = if k >= 0 { (&a, &b) } else { (&b, &a) };
    let off = k.unsigned_abs() as usize;
    let len = policy.n_max + 1 - off;
    let inner = len - 1;
    let rows_big: Vec<usize> = (off..off + inner).collect();
    let rows_small: Vec<usize> = (0..inner).collect();
    let mut comp = BTreeMap::new();
    for g in [Gen::E, Gen::F] {
        let x = submatrix(big.get(g), &rows_big, &rows_big);
        let y = submatrix(small.get(g), &rows_small, &rows_small);
        comp.insert(format!("{g:?}"), relative_residual(&[x, -y]));
    }
    let wdiff = (0..inner)
        .map(|i| (big.space.weights[off + i].h1 - small.space.weights[i].h1).norm())
        .fold(0.0, f64::max);
    comp.insert("weights".into(), wdiff);
    let e_u0 = verma_coefficient(qs, mu1, lambda1, 0);
    Ok(RelationReport::from_components("shift_isomorphism", comp, 0.0, policy.tol)
        .with_complex("mu0", mu0)
        .with_complex("lambda0", lambda0)
        .with_param("k", k)
        .with_param("highest_weight_after_shift", e_u0.norm() < 1e-12))
}

/// The Fock module W^+ of the q-oscillator algebra.
pub fn osc_fock_plus(qs: &QScalar, policy: &TruncationPolicy) -> RepTable {
    let n_max = policy.n_max as i64;
    let dim = policy.n_max + 1;
    let space = BasisSpace::range(0, n_max, weights_h1(0..=n_max, |n| cr(n as f64)), false, true);
    RepTable::new("chi+", AlgebraTag::Osc, *qs, space)
        .with(Gen::Bdag, raising(dim, |_| cr(1.0), 0))
        .with(Gen::B, lowering(dim, |n| qs.qnum(cr(n as f64)), 0))
}

/// The Fock module W^- of the q-oscillator algebra.
pub fn osc_fock_minus(qs: &QScalar, policy: &TruncationPolicy) -> RepTable {
    let n_max = policy.n_max as i64;
    let dim = policy.n_max + 1;
    let space = BasisSpace::range(0, n_max, weights_h1(0..=n_max, |n| cr(-(n as f64) - 1.0)), false, true);
    RepTable::new("chi-", AlgebraTag::Osc, *qs, space)
        .with(Gen::B, raising(dim, |_| cr(1.0), 0))
        .with(Gen::Bdag, lowering(dim, |n| -qs.qnum(cr(n as f64)), 0))
}

/// The module W^lambda on labels -n_max..=n_max, truncated at both ends.
pub fn osc_general(qs: &QScalar, lambda: C64, policy: &TruncationPolicy) -> RepTable {
    let n_max = policy.n_max as i64;
    let dim = 2 * policy.n_max + 1;
    let space = BasisSpace::range(-n_max, n_max, weights_h1(-n_max..=n_max, |n| lambda + n as f64), true, true);
    RepTable::new(format!("chi({lambda})"), AlgebraTag::Osc, *qs, space)
        .with(Gen::Bdag, raising(dim, |_| cr(1.0), -n_max))
        .with(Gen::B, lowering(dim, |n| qs.qnum(lambda + n as f64), -n_max))
        .param("lambda", lambda)
}

/// Residual of the identification of W^0 / W^+ with W^-, through the basis
/// w_k = (-1)^k [k]! v_{-k-1} of the quotient.
pub fn osc_quotient_check(qs: &QScalar, policy: &TruncationPolicy) -> RelationReport {
    let n_max = policy.n_max;
    let w0 = osc_general(qs, cr(0.0), policy);
    // indices of v_{-1}, v_{-2}, ..., v_{-n_max} inside W^0
    let idx: Vec<usize> = (0..n_max).map(|k| n_max - 1 - k).collect();
    let mut c = vec![cr(1.0); n_max];
    for k in 1..n_max {
        c[k] = -c[k - 1] * qs.qnum(cr(k as f64));
    }
    let d = DMatrix::from_diagonal(&DVector::from_vec(c.clone()));
    let dinv = DMatrix::from_diagonal(&DVector::from_iterator(n_max, c.iter().map(|z| recip(*z))));
    let minus = osc_fock_minus(qs, &TruncationPolicy { n_max: n_max - 1, ..*policy });
    let inner: Vec<usize> = (0..n_max - 1).collect();
    let mut comp = BTreeMap::new();
    for g in [Gen::B, Gen::Bdag] {
        let block = submatrix(w0.get(g), &idx, &idx);
        let conj = &dinv * block * &d;
        let x = submatrix(&conj, &inner, &inner);
        let y = submatrix(minus.get(g), &inner, &inner);
        comp.insert(format!("{g:?}"), relative_residual(&[x, -y]));
    }
    let wdiff = (0..n_max)
        .map(|k| (w0.space.weights[idx[k]].h1 - minus.space.weights[k].h1).norm())
        .fold(0.0, f64::max);
    comp.insert("weights".into(), wdiff);
    RelationReport::from_components("osc_quotient", comp, 0.0, policy.tol)
}

/// Highest weight of an evaluation representation: generic (truncated) or a non-negative integer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EvalWeight {
    Generic(C64),
    Finite(usize),
}

/// Evaluation representation of the loop algebra at spectral point `pt`.
pub fn jimbo_eval(qs: &QScalar, weight: EvalWeight, pt: SpectralPoint, g: Grading, policy: &TruncationPolicy) -> RepTable {
    let (mu, dim, cut) = match weight {
        EvalWeight::Generic(mu) => (mu, policy.n_max + 1, true),
        EvalWeight::Finite(m) => (cr(m as f64), m + 1, false),
    };
    let hi = dim as i64 - 1;
    let space = BasisSpace::range(0, hi, weights_h1(0..=hi, |n| mu - 2.0 * n as f64), false, cut);
    let z = |a: f64| qs.pow(pt.u * a);
    let (s0, s1) = (g.s0 as f64, g.s1 as f64);
    let p = |n: i64| qs.qnum(cr(n as f64)) * qs.qnum(mu - n as f64 + 1.0);
    let name = match weight {
        EvalWeight::Generic(_) => format!("eval({mu})@{}", pt.u),
        EvalWeight::Finite(m) => format!("eval_finite({m})@{}", pt.u),
    };
    let mut rep = RepTable::new(name, AlgebraTag::Loop, *qs, space)
        .with(Gen::E0, raising(dim, |_| z(s0), 0))
        .with(Gen::E1, lowering(dim, |n| z(s1) * p(n), 0))
        .with(Gen::F0, lowering(dim, |n| z(-s0) * p(n), 0))
        .with(Gen::F1, raising(dim, |_| z(-s1), 0))
        .param("mu", mu)
        .param("u", pt.u);
    if cut && near_nonneg_integer(mu) {
        rep.notes.push(format!("mu = {mu} is close to a non-negative integer; the module is reducible"));
    }
    rep
}

/// The (m+1)-dimensional evaluation representation; no truncation is involved.
pub fn finite_dim_eval(qs: &QScalar, m: usize, pt: SpectralPoint, g: Grading) -> RepTable {
    jimbo_eval(qs, EvalWeight::Finite(m), pt, g, &TruncationPolicy::default())
}

/// The shifted representation phi[xi] of the Borel subalgebra.
pub fn shift_rep(rep: &RepTable, xi: ShiftWeight) -> Result<RepTable> {
    ShiftWeight::new(xi.xi_h0, xi.xi_h1)?;
    if !matches!(rep.algebra, AlgebraTag::Loop | AlgebraTag::BorelPlus) {
        return Err(Error::Incompatible("shifts apply to loop or Borel representations".into()));
    }
    let mut out = rep.clone();
    out.algebra = AlgebraTag::BorelPlus;
    out.action.remove(&Gen::F0);
    out.action.remove(&Gen::F1);
    for w in out.space.weights.iter_mut() {
        w.h0 += xi.xi_h0;
        w.h1 += xi.xi_h1;
    }
    out.name = format!("{}[{}]", rep.name, xi.xi_h0);
    out.params.insert("xi_h0".into(), xi.xi_h0);
    Ok(out)
}

/// Smallest relative residual of the relations [e_i, f_j] = delta_ij [h_i] over all
/// f-actions compatible with the weights, found by linear least squares. Zero exactly
/// when the Borel representation extends to the loop algebra on the interior block.
pub fn nonextendability_residual(rep: &RepTable) -> f64 {
    let d = rep.dim();
    let qs = rep.qs;
    // unknowns: f0 lowering entries (n-1, n), n >= 1, then f1 raising entries (n+1, n)
    let nf = d - 1;
    let idx = rep.space.interior(2);
    let e = [rep.get(Gen::E0).clone(), rep.get(Gen::E1).clone()];
    let bracket = |i: usize| (rep.qh(i, cr(1.0)) - rep.qh(i, cr(-1.0))) / qs.kappa();
    let mut rows: Vec<Vec<C64>> = Vec::new();
    let mut rhs: Vec<C64> = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            let target = if i == j { bracket(i) } else { DMatrix::zeros(d, d) };
            // column responses for each unknown
            let mut cols: Vec<DMatrix<C64>> = Vec::with_capacity(2 * nf);
            for k in 0..2 * nf {
                let mut f = DMatrix::zeros(d, d);
                let is_f0 = k < nf;
                if (j == 0) != is_f0 {
                    cols.push(DMatrix::zeros(d, d));
                    continue;
                }
                if is_f0 {
                    f[(k, k + 1)] = cr(1.0);
                } else {
                    let n = k - nf;
                    f[(n + 1, n)] = cr(1.0);
                }
                cols.push(&e[i] * &f - &f * &e[i]);
            }
            for &r in &idx {
                for &cidx in &idx {
                    rows.push(cols.iter().map(|m| m[(r, cidx)]).collect());
                    rhs.push(target[(r, cidx)]);
                }
            }
        }
    }
    let a = DMatrix::from_fn(rows.len(), 2 * nf, |r, k| rows[r][k]);
    let b = DVector::from_vec(rhs);
    let svd = a.clone().svd(true, true);
    let x = match svd.solve(&b, 1e-14) {
        Ok(x) => x,
        Err(_) => return f64::NAN,
    };
    let res = &a * x - &b;
    res.norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn borel(name: String, qs: &QScalar, space: BasisSpace, e0: DMatrix<C64>, e1: DMatrix<C64>) -> RepTable {
    RepTable::new(name, AlgebraTag::BorelPlus, *qs, space).with(Gen::E0, e0).with(Gen::E1, e1)
}

/// The Borel representation rho^+ from its displayed action.
pub fn rho_plus(qs: &QScalar, pt: SpectralPoint, g: Grading, policy: &TruncationPolicy) -> RepTable {
    let n_max = policy.n_max as i64;
    let dim = policy.n_max + 1;
    let k = qs.kappa();
    let z = |a: f64| qs.pow(pt.u * a);
    let space = BasisSpace::range(0, n_max, weights_h1(0..=n_max, |n| cr(-2.0 * n as f64)), false, true);
    let e1 = |n: i64| z(g.s1 as f64) / k * qs.powf(-(n as f64)) * qs.qnum(cr(n as f64));
    borel(format!("rho+@{}", pt.u), qs, space, raising(dim, |_| z(g.s0 as f64), 0), lowering(dim, e1, 0))
        .param("u", pt.u)
}

/// The Borel representation rho-bar^- from its displayed action.
pub fn rho_bar_minus(qs: &QScalar, pt: SpectralPoint, g: Grading, policy: &TruncationPolicy) -> RepTable {
    let n_max = policy.n_max as i64;
    let dim = policy.n_max + 1;
    let k = qs.kappa();
    let z = |a: f64| qs.pow(pt.u * a);
    let space = BasisSpace::range(0, n_max, weights_h1(0..=n_max, |n| cr(-2.0 * (n as f64 + 1.0))), false, true);
    let e0 = |n: i64| z(g.s0 as f64) / k * qs.powf(n as f64 + 1.0);
    let e1 = |n: i64| -z(g.s1 as f64) * qs.qnum(cr(n as f64));
    borel(format!("rhobar-@{}", pt.u), qs, space, raising(dim, e0, 0), lowering(dim, e1, 0)).param("u", pt.u)
}

/// Compose an oscillator representation with the homomorphism rho
/// (e0 -> b^dag, e1 -> b q^{-N}/kappa, h0 -> 2N, h1 -> -2N), or with rho o sigma
/// when `sigma` is set, then apply the spectral grading.
pub fn borel_from_oscillator(osc: &RepTable, sigma: bool, pt: SpectralPoint, g: Grading) -> Result<RepTable> {
    if osc.algebra != AlgebraTag::Osc {
        return Err(Error::Incompatible("expected an oscillator representation".into()));
    }
    let qs = osc.qs;
    let k = qs.kappa();
    let rho_e0 = osc.get(Gen::Bdag).clone();
    let rho_e1 = osc.get(Gen::B) * osc.space.cartan_h1(&qs, cr(-1.0)) / k;
    let z = |a: f64| qs.pow(pt.u * a);
    let (e0, e1) = if sigma { (rho_e1, rho_e0) } else { (rho_e0, rho_e1) };
    let mut space = osc.space.clone();
    for w in space.weights.iter_mut() {
        let n = w.h1;
        // rho(h0) = 2N, rho(h1) = -2N; sigma swaps the two
        let (h0, h1) = if sigma { (-2.0 * n, 2.0 * n) } else { (2.0 * n, -2.0 * n) };
        *w = Weight { h0, h1 };
    }
    let name = format!("{}o{}@{}", osc.name, if sigma { "rhobar" } else { "rho" }, pt.u);
    Ok(borel(name, &qs, space, e0 * z(g.s0 as f64), e1 * z(g.s1 as f64)).param("u", pt.u))
}

/// rho^+ built as chi^+ composed with rho.
pub fn rho_plus_via_oscillator(qs: &QScalar, pt: SpectralPoint, g: Grading, policy: &TruncationPolicy) -> RepTable {
    borel_from_oscillator(&osc_fock_plus(qs, policy), false, pt, g).expect("oscillator input")
}

/// rho-bar^- built as chi^- composed with rho o sigma.
pub fn rho_bar_minus_via_oscillator(qs: &QScalar, pt: SpectralPoint, g: Grading, policy: &TruncationPolicy) -> RepTable {
    borel_from_oscillator(&osc_fock_minus(qs, policy), true, pt, g).expect("oscillator input")
}

/// The interpolating representation rho^{+,mu}.
pub fn rho_plus_mu(qs: &QScalar, mu: C64, pt: SpectralPoint, g: Grading, policy: &TruncationPolicy) -> RepTable {
    let n_max = policy.n_max as i64;
    let dim = policy.n_max + 1;
    let k = qs.kappa();
    let z = |a: f64| qs.pow(pt.u * a);
    let space = BasisSpace::range(0, n_max, weights_h1(0..=n_max, |n| cr(-2.0 * n as f64)), false, true);
    let e1 = |n: i64| {
        let nf = n as f64;
        z(g.s1 as f64) / k * (qs.powf(-nf) - qs.pow(-2.0 * mu + nf - 2.0)) * qs.qnum(cr(nf))
    };
    borel(format!("rho+({mu})@{}", pt.u), qs, space, raising(dim, |_| z(g.s0 as f64), 0), lowering(dim, e1, 0))
        .param("mu", mu)
        .param("u", pt.u)
}

/// The interpolating representation rho-bar^{-,mu}.
pub fn rho_bar_minus_mu(qs: &QScalar, mu: C64, pt: SpectralPoint, g: Grading, policy: &TruncationPolicy) -> RepTable {
    let n_max = policy.n_max as i64;
    let dim = policy.n_max + 1;
    let k = qs.kappa();
    let z = |a: f64| qs.pow(pt.u * a);
    let space = BasisSpace::range(0, n_max, weights_h1(0..=n_max, |n| cr(-2.0 * (n as f64 + 1.0))), false, true);
    let e0 = |n: i64| z(g.s0 as f64) / k * qs.powf(n as f64 + 1.0);
    let e1 = |n: i64| {
        let nf = n as f64;
        -z(g.s1 as f64) * (1.0 - qs.pow(2.0 * (mu - nf + 1.0))) * qs.qnum(cr(nf))
    };
    borel(format!("rhobar-({mu})@{}", pt.u), qs, space, raising(dim, e0, 0), lowering(dim, e1, 0))
        .param("mu", mu)
        .param("u", pt.u)
}

/// Residual between `source` conjugated by diag(d) and `target`, over e0, e1 and weights,
/// on the interior block.
pub fn conjugation_residual(source: &RepTable, d: &[C64], target: &RepTable, buffer: usize) -> BTreeMap<String, f64> {
    let n = d.len();
    let dm = DMatrix::from_diagonal(&DVector::from_vec(d.to_vec()));
    let dinv = DMatrix::from_diagonal(&DVector::from_iterator(n, d.iter().map(|z| recip(*z))));
    let conj = source.conjugate(&dm, &dinv);
    let idx: Vec<usize> = source.space.interior(buffer).into_iter().filter(|&i| target.space.edge[i] >= buffer).collect();
    let mut comp = BTreeMap::new();
    for g in [Gen::E0, Gen::E1] {
        let x = submatrix(conj.get(g), &idx, &idx);
        let y = submatrix(target.get(g), &idx, &idx);
        comp.insert(format!("{g:?}"), relative_residual(&[x, -y]));
    }
    let wdiff = idx
        .iter()
        .map(|&i| {
            let (a, b) = (source.space.weights[i], target.space.weights[i]);
            (a.h0 - b.h0).norm().max((a.h1 - b.h1).norm())
        })
        .fold(0.0, f64::max);
    comp.insert("weights".into(), wdiff);
    comp
}

/// Conjugates the shifted evaluation representation at q^{-(mu+1)/s} zeta, shift xi(h0) = mu,
/// to rho^{+,mu}_zeta through w_n = q^{-n(mu+1)s0/s} v_n.
pub fn rho_plus_mu_isomorphism_check(
    qs: &QScalar,
    mu: C64,
    pt: SpectralPoint,
    g: Grading,
    policy: &TruncationPolicy,
) -> Result<RelationReport> {
    let s = g.sf();
    let ev = jimbo_eval(qs, EvalWeight::Generic(mu), pt.shifted(-(mu + 1.0) / s), g, policy);
    let src = shift_rep(&ev, ShiftWeight::from_h0(mu))?;
    let d: Vec<C64> = (0..=policy.n_max).map(|n| qs.pow(-(n as f64) * (mu + 1.0) * g.s0 as f64 / s)).collect();
    let target = rho_plus_mu(qs, mu, pt, g, policy);
    let comp = conjugation_residual(&src, &d, &target, 1);
    Ok(RelationReport::from_components("rho_plus_mu_isomorphism", comp, 0.0, policy.tol)
        .with_complex("mu", mu)
        .with_complex("u", pt.u))
}

/// Conjugates the shifted evaluation representation at q^{(mu+1)/s} zeta, shift xi(h0) = mu + 2,
/// to rho-bar^{-,mu}_zeta through w_n = kappa^n q^{-n(n+1)/2} q^{n(mu+1)s0/s} v_n.
pub fn rho_bar_minus_mu_isomorphism_check(
    qs: &QScalar,
    mu: C64,
    pt: SpectralPoint,
    g: Grading,
    policy: &TruncationPolicy,
) -> Result<RelationReport> {
    let s = g.sf();
    let ev = jimbo_eval(qs, EvalWeight::Generic(mu), pt.shifted((mu + 1.0) / s), g, policy);
    let src = shift_rep(&ev, ShiftWeight::from_h0(mu + 2.0))?;
    let k = qs.kappa();
    let d: Vec<C64> = (0..=policy.n_max)
        .map(|n| {
            let nf = n as f64;
            k.powf(nf) * qs.powf(-nf * (nf + 1.0) / 2.0) * qs.pow(nf * (mu + 1.0) * g.s0 as f64 / s)
        })
        .collect();
    let target = rho_bar_minus_mu(qs, mu, pt, g, policy);
    let comp = conjugation_residual(&src, &d, &target, 1);
    Ok(RelationReport::from_components("rho_bar_minus_mu_isomorphism", comp, 0.0, policy.tol)
        .with_complex("mu", mu)
        .with_complex("u", pt.u))
}

/// Largest entrywise relative distance between rho^{+,mu}(e1) and rho^+(e1) on the interior block.
pub fn rho_plus_mu_limit_distance(qs: &QScalar, mu: C64, pt: SpectralPoint, g: Grading, policy: &TruncationPolicy) -> f64 {
    let a = rho_plus_mu(qs, mu, pt, g, policy);
    let b = rho_plus(qs, pt, g, policy);
    let idx = b.space.interior(1);
    let x = submatrix(a.get(Gen::E1), &idx, &idx);
    let y = submatrix(b.get(Gen::E1), &idx, &idx);
    x.iter()
        .zip(y.iter())
        .filter(|(_, b)| b.norm() > 0.0)
        .map(|(a, b)| (a - b).norm() / b.norm())
        .fold(0.0, f64::max)
}

/// The representation U^{delta, gamma1, gamma2}. When gamma0 = gamma1 + gamma2 the labels n >= 0
/// span an invariant subspace and are used; otherwise labels run over -n_max..=n_max.
pub fn generalized_rep(qs: &QScalar, spec: &GeneralizedRepSpec, g: Grading, policy: &TruncationPolicy) -> RepTable {
    let n_max = policy.n_max as i64;
    let half = spec.has_invariant_half();
    let lo = if half { 0 } else { -n_max };
    let dim = (n_max - lo + 1) as usize;
    let z = |a: f64| qs.pow(spec.zeta.u * a);
    let space = BasisSpace::range(lo, n_max, weights_h1(lo..=n_max, |n| -spec.delta - 2.0 * n as f64), !half, true);
    let e1 = |n: i64| z(g.s1 as f64) * spec.c_n(qs, n);
    borel(format!("generalized({},{},{})", spec.delta, spec.gamma1, spec.gamma2), qs, space, raising(dim, |_| z(g.s0 as f64), lo), lowering(dim, e1, lo))
        .param("delta", spec.delta)
        .param("gamma0", spec.gamma0)
        .param("gamma1", spec.gamma1)
        .param("gamma2", spec.gamma2)
        .param("u", spec.zeta.u)
}

/// Identify the isomorphism class of U^{delta, gamma1, gamma2} and report the
/// conjugation residual to the standard representation of that class.
pub fn classify_generalized(
    qs: &QScalar,
    spec: &GeneralizedRepSpec,
    g: Grading,
    policy: &TruncationPolicy,
) -> Result<(GeneralizedClass, RelationReport)> {
    if !spec.has_invariant_half() {
        return Err(Error::Unclassified(format!(
            "gamma0 - gamma1 - gamma2 = {} != 0; the trace over this representation is singular",
            spec.gamma0 - spec.gamma1 - spec.gamma2
        )));
    }
    let tiny = 1e-14;
    let (g1z, g2z) = (spec.gamma1.norm() < tiny, spec.gamma2.norm() < tiny);
    let h = qs.hbar();
    let s = g.sf();
    let s0 = g.s0 as f64;
    // kappa = q^{lk}
    let lk = qs.kappa().ln() / h;
    let src = generalized_rep(qs, spec, g, policy);
    let u = spec.zeta.u;
    let (class, target, d): (GeneralizedClass, RepTable, Vec<C64>) = match (g1z, g2z) {
        (false, false) => {
            let d1 = spec.gamma1.ln() / (2.0 * h);
            let d2 = spec.gamma2.ln() / (2.0 * h);
            let expo = 2.0 * lk + d1 + d2;
            let ev = jimbo_eval(qs, EvalWeight::Generic(d1 - d2 - 1.0), SpectralPoint::new(u + expo / s), g, policy);
            let t = shift_rep(&ev, ShiftWeight::from_h0(spec.delta + d1 - d2 - 1.0))?;
            let d = (0..=policy.n_max).map(|n| qs.pow(-(n as f64) * s0 * expo / s)).collect();
            (GeneralizedClass::ShiftedVerma, t, d)
        }
        (false, true) => {
            let d1 = spec.gamma1.ln() / (2.0 * h);
            let expo = 2.0 * lk + 2.0 * d1;
            let t = shift_rep(&rho_plus(qs, SpectralPoint::new(u + expo / s), g, policy), ShiftWeight::from_h0(spec.delta))?;
            let d = (0..=policy.n_max).map(|n| qs.pow(-(n as f64) * s0 * expo / s)).collect();
            (GeneralizedClass::OscillatorPlus, t, d)
        }
        (true, false) => {
            let d2 = spec.gamma2.ln() / (2.0 * h);
            let expo = 2.0 * lk + 2.0 * d2;
            let t = shift_rep(
                &rho_bar_minus(qs, SpectralPoint::new(u + expo / s), g, policy),
                ShiftWeight::from_h0(spec.delta - 2.0),
            )?;
            let d = (0..=policy.n_max)
                .map(|n| {
                    let nf = n as f64;
                    qs.pow(nf * lk - nf * s0 * expo / s) * qs.powf(-nf * (nf + 1.0) / 2.0)
                })
                .collect();
            (GeneralizedClass::OscillatorBarMinus, t, d)
        }
        (true, true) => {
            return Err(Error::Unclassified("gamma1 = gamma2 = 0 gives the trivial action of e1".into()));
        }
    };
    let comp = conjugation_residual(&src, &d, &target, 1);
    let rep = RelationReport::from_components("classify_generalized", comp, 0.0, policy.tol)
        .with_param("class", class)
        .with_complex("delta", spec.delta)
        .with_complex("gamma1", spec.gamma1)
        .with_complex("gamma2", spec.gamma2);
    Ok((class, rep))
}

/// Catalog record of a representation for documentation and debugging.
pub fn catalog_entry(rep: &RepTable) -> serde_json::Value {
    let params: BTreeMap<&String, [f64; 2]> = rep.params.iter().map(|(k, v)| (k, [v.re, v.im])).collect();
    let weights: Vec<[f64; 4]> = rep.space.weights.iter().map(|w| [w.h0.re, w.h0.im, w.h1.re, w.h1.im]).collect();
    serde_json::json!({
        "name": rep.name,
        "algebra": rep.algebra,
        "dim": rep.dim(),
        "truncated": rep.space.is_truncated(),
        "params": params,
        "weights": weights,
        "notes": rep.notes,
    })
}

pub fn catalog_json(reps: &[RepTable]) -> String {
    serde_json::to_string_pretty(&reps.iter().map(catalog_entry).collect::<Vec<_>>()).expect("json")
}
