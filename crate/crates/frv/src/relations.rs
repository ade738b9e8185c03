//! Residual checks of the functional relations among calibrated transfer matrices and
//! Q-operators. All spectral shifts q^{a/s} zeta are applied additively in u.

use crate::calibration::CalibrationProfile;
use crate::Result;
use nalgebra::DMatrix;
use qloop::chainops::{
    q_bar_operator, q_operator, q_operator_shifted, transfer_t_finite, transfer_t_mu, transfer_t_tilde, ChainOperator,
    ChainSpec,
};
use qloop::qcore::{relative_residual, submatrix};
use qloop::representations::{jimbo_eval, rho_bar_minus, rho_plus, shift_rep, EvalWeight, ShiftWeight};
use qloop::{Grading, QScalar, RelationReport, SpectralPoint, TruncationPolicy, C64};
use std::collections::BTreeMap;

/// A chain operator together with an absolute bound on its truncation error.
#[derive(Clone, Debug)]
pub struct Term {
    pub mat: DMatrix<C64>,
    pub tail: f64,
}

impl Term {
    pub fn exact(mat: DMatrix<C64>) -> Self {
        Self { mat, tail: 0.0 }
    }

    pub fn mul(&self, other: &Term) -> Term {
        let tail = self.tail * other.mat.norm() + self.mat.norm() * other.tail + self.tail * other.tail;
        Term { mat: &self.mat * &other.mat, tail }
    }

    pub fn scale(&self, c: C64) -> Term {
        Term { mat: &self.mat * c, tail: self.tail * c.norm() }
    }

    pub fn neg(&self) -> Term {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl From<ChainOperator> for Term {
    fn from(op: ChainOperator) -> Self {
        let tail = op.tail();
        Term { mat: op.matrix.mat, tail }
    }
}

/// Calibrated operator families on one chain.
pub struct Evaluator<'a> {
    pub chain: &'a ChainSpec,
    pub profile: &'a CalibrationProfile,
    pub policy: &'a TruncationPolicy,
}

impl<'a> Evaluator<'a> {
    pub fn new(chain: &'a ChainSpec, profile: &'a CalibrationProfile, policy: &'a TruncationPolicy) -> Self {
        Self { chain, profile, policy }
    }

    fn s(&self) -> f64 {
        self.chain.grading.sf()
    }

    fn qp(&self, nu: C64) -> C64 {
        self.chain.qs.pow(nu)
    }

    pub fn t_tilde(&self, mu: C64, u: C64) -> Result<Term> {
        Ok(transfer_t_tilde(mu, SpectralPoint::new(u), self.chain, self.policy, self.profile)?.into())
    }

    pub fn t_mu(&self, mu: C64, u: C64) -> Result<Term> {
        Ok(transfer_t_mu(mu, SpectralPoint::new(u), self.chain, self.policy, self.profile)?.into())
    }

    pub fn t_finite(&self, m: u32, u: C64) -> Result<Term> {
        Ok(transfer_t_finite(m, SpectralPoint::new(u), self.chain, self.profile)?.into())
    }

    pub fn q(&self, u: C64) -> Result<Term> {
        Ok(q_operator(SpectralPoint::new(u), self.chain, self.policy, self.profile)?.into())
    }

    pub fn q_bar(&self, u: C64) -> Result<Term> {
        Ok(q_bar_operator(SpectralPoint::new(u), self.chain, self.policy, self.profile)?.into())
    }

    pub fn q_shifted(&self, xi: ShiftWeight, u: C64) -> Result<Term> {
        Ok(q_operator_shifted(xi, SpectralPoint::new(u), self.chain, self.policy, self.profile)?.into())
    }

    /// C = q^{(h1 + 2 phi)/2} - q^{-(h1 + 2 phi)/2} on the chain.
    pub fn c_op(&self) -> Term {
        let phi = self.chain.twist_phi;
        let qs = self.chain.qs;
        Term::exact(self.chain.diagonal(|w| qs.pow((w + 2.0 * phi) / 2.0) - qs.pow(-(w + 2.0 * phi) / 2.0)))
    }

    pub fn identity(&self) -> Term {
        Term::exact(DMatrix::identity(self.chain.dim(), self.chain.dim()))
    }

    /// q^{(mu+1) phi} C Q(q^{(mu+1)/s} zeta) Q-bar(q^{-(mu+1)/s} zeta).
    pub fn factorized(&self, mu: C64, u: C64, sign: f64) -> Result<Term> {
        let sh = (mu + 1.0) / self.s() * sign;
        let phi = self.chain.twist_phi;
        Ok(self.c_op().mul(&self.q(u + sh)?).mul(&self.q_bar(u - sh)?).scale(self.qp(sign * (mu + 1.0) * phi)))
    }
}

/// Relative residuals of a vanishing sum of terms, globally and per magnetization
/// sector. The third value is the combined tail bound relative to the largest term.
pub fn residuals(chain: &ChainSpec, terms: &[Term]) -> (f64, f64, f64) {
    let mats: Vec<DMatrix<C64>> = terms.iter().map(|t| t.mat.clone()).collect();
    let global = relative_residual(&mats);
    let scale = mats.iter().map(|m| m.norm()).fold(0.0, f64::max);
    let tail = if scale > 0.0 { terms.iter().map(|t| t.tail).sum::<f64>() / scale } else { 0.0 };
    let h = chain.h1();
    let mut sectors: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, w) in h.iter().enumerate() {
        sectors.entry(w.round() as i64).or_default().push(i);
    }
    let mut worst: f64 = 0.0;
    for idx in sectors.values() {
        let blocks: Vec<DMatrix<C64>> = mats.iter().map(|m| submatrix(m, idx, idx)).collect();
        let bscale = blocks.iter().map(|m| m.norm()).fold(0.0, f64::max);
        if bscale > 1e-13 * scale {
            worst = worst.max(relative_residual(&blocks));
        }
    }
    (global, worst, tail)
}

struct Collector<'c> {
    chain: &'c ChainSpec,
    components: BTreeMap<String, f64>,
    tail: f64,
}

impl<'c> Collector<'c> {
    fn new(chain: &'c ChainSpec) -> Self {
        Self { chain, components: BTreeMap::new(), tail: 0.0 }
    }

    fn add(&mut self, name: &str, terms: &[Term]) {
        let (g, s, t) = residuals(self.chain, terms);
        self.components.insert(name.to_string(), g);
        self.components.insert(format!("{name}_sector"), s);
        self.tail = self.tail.max(t);
    }

    fn finish(self, id: &str, pt: SpectralPoint, policy: &TruncationPolicy) -> RelationReport {
        RelationReport::from_components(id, self.components, self.tail, policy.tol)
            .with_complex("u", pt.u)
            .with_complex("phi", self.chain.twist_phi)
            .with_param("L", self.chain.len())
            .with_param("n_max", policy.n_max)
    }
}

/// The factorization of T~_mu into Q and Q-bar, and its antisymmetrized form for T_mu.
pub fn check_factorization(
    mu: C64,
    pt: SpectralPoint,
    chain: &ChainSpec,
    profile: &CalibrationProfile,
    policy: &TruncationPolicy,
) -> Result<RelationReport> {
    let ev = Evaluator::new(chain, profile, policy);
    let u = pt.u;
    let mut col = Collector::new(chain);
    let plus = ev.factorized(mu, u, 1.0)?;
    col.add("t_tilde_product", &[ev.t_tilde(mu, u)?, plus.neg()]);
    let minus = ev.factorized(mu, u, -1.0)?;
    col.add("t_mu_from_q", &[ev.t_mu(mu, u)?, plus.neg(), minus]);
    Ok(col.finish("factorization", pt, policy).with_complex("mu", mu))
}

/// T(zeta) Q(zeta) = q^phi Q(q^{2/s} zeta) + q^{-phi} Q(q^{-2/s} zeta) with T = T_1.
pub fn check_tq(pt: SpectralPoint, chain: &ChainSpec, profile: &CalibrationProfile, policy: &TruncationPolicy) -> Result<RelationReport> {
    tq_like(pt, chain, profile, policy, false)
}

/// T(zeta) Q-bar(zeta) = q^{-phi} Q-bar(q^{2/s} zeta) + q^phi Q-bar(q^{-2/s} zeta).
pub fn check_tq_bar(
    pt: SpectralPoint,
    chain: &ChainSpec,
    profile: &CalibrationProfile,
    policy: &TruncationPolicy,
) -> Result<RelationReport> {
    tq_like(pt, chain, profile, policy, true)
}

fn tq_like(pt: SpectralPoint, chain: &ChainSpec, profile: &CalibrationProfile, policy: &TruncationPolicy, bar: bool) -> Result<RelationReport> {
    let ev = Evaluator::new(chain, profile, policy);
    let u = pt.u;
    let s = ev.s();
    let phi = chain.twist_phi;
    let (qq, sg): (&dyn Fn(C64) -> Result<Term>, f64) = if bar { (&|v| ev.q_bar(v), -1.0) } else { (&|v| ev.q(v), 1.0) };
    let t = ev.t_finite(1, u)?;
    let terms = [
        t.mul(&qq(u)?),
        qq(u + 2.0 / s)?.scale(-ev.qp(sg * phi)),
        qq(u - 2.0 / s)?.scale(-ev.qp(-sg * phi)),
    ];
    let id = if bar { "tq_bar" } else { "tq" };
    let mut col = Collector::new(chain);
    col.add(id, &terms);
    Ok(col.finish(id, pt, policy))
}

/// The three-term relations for Q and Q-bar and the two-term relations for T~ at (alpha, beta, gamma).
pub fn check_tq_general(
    alpha: C64,
    beta: C64,
    gamma: C64,
    pt: SpectralPoint,
    chain: &ChainSpec,
    profile: &CalibrationProfile,
    policy: &TruncationPolicy,
) -> Result<RelationReport> {
    let ev = Evaluator::new(chain, profile, policy);
    let u = pt.u;
    let s = ev.s();
    let phi = chain.twist_phi;
    let idx = |a: C64, b: C64| (a - b) / 2.0 - 1.0;
    let arg = |a: C64, b: C64| u + (a + b) / (2.0 * s);
    let at = |a: C64| u + a / s;
    let mut col = Collector::new(chain);

    let (qa, qb, qg) = (ev.q(at(alpha))?, ev.q(at(beta))?, ev.q(at(gamma))?);
    let (ba, bb, bg) = (ev.q_bar(at(alpha))?, ev.q_bar(at(beta))?, ev.q_bar(at(gamma))?);
    let t_ab = ev.t_mu(idx(alpha, beta), arg(alpha, beta))?;
    let t_bg = ev.t_mu(idx(beta, gamma), arg(beta, gamma))?;
    let t_ga = ev.t_mu(idx(gamma, alpha), arg(gamma, alpha))?;
    for (name, sg, qa, qb, qg) in [("tq_universal", 1.0, &qa, &qb, &qg), ("tq_bar_universal", -1.0, &ba, &bb, &bg)] {
        col.add(
            name,
            &[
                t_ab.mul(qg).scale(ev.qp(sg * gamma * phi / 2.0)),
                t_bg.mul(qa).scale(ev.qp(sg * alpha * phi / 2.0)),
                t_ga.mul(qb).scale(ev.qp(sg * beta * phi / 2.0)),
            ],
        );
    }

    let tt_ab = ev.t_tilde(idx(alpha, beta), arg(alpha, beta))?;
    let tt_gb = ev.t_tilde(idx(gamma, beta), arg(gamma, beta))?;
    col.add(
        "tt_q",
        &[tt_ab.mul(&qg).scale(ev.qp(gamma * phi / 2.0)), tt_gb.mul(&qa).scale(-ev.qp(alpha * phi / 2.0))],
    );
    let tt_ag = ev.t_tilde(idx(alpha, gamma), arg(alpha, gamma))?;
    col.add(
        "tt_q_bar",
        &[tt_ab.mul(&bg).scale(ev.qp(-gamma * phi / 2.0)), tt_ag.mul(&bb).scale(-ev.qp(-beta * phi / 2.0))],
    );
    Ok(col
        .finish("tq_general", pt, policy)
        .with_complex("alpha", alpha)
        .with_complex("beta", beta)
        .with_complex("gamma", gamma))
}

/// C [q^phi Q(q^{1/s} zeta) Q-bar(q^{-1/s} zeta) - q^{-phi} Q(q^{-1/s} zeta) Q-bar(q^{1/s} zeta)] = 1.
pub fn check_wronskian(
    pt: SpectralPoint,
    chain: &ChainSpec,
    profile: &CalibrationProfile,
    policy: &TruncationPolicy,
) -> Result<RelationReport> {
    let mut col = Collector::new(chain);
    col.add("wronskian", &wronskian_terms(chain, profile, policy, pt.u)?);
    Ok(col.finish("wronskian", pt, policy))
}

fn wronskian_terms(chain: &ChainSpec, profile: &CalibrationProfile, policy: &TruncationPolicy, u: C64) -> Result<[Term; 3]> {
    let ev = Evaluator::new(chain, profile, policy);
    let zero = C64::new(0.0, 0.0);
    Ok([ev.factorized(zero, u, 1.0)?, ev.factorized(zero, u, -1.0)?.neg(), ev.identity().neg()])
}

/// Largest Wronskian residual over a grid.
pub fn check_wronskian_at(
    chain: &ChainSpec,
    profile: &CalibrationProfile,
    policy: &TruncationPolicy,
    grid: &[SpectralPoint],
) -> qloop::Result<f64> {
    let mut worst: f64 = 0.0;
    for pt in grid {
        let terms = wronskian_terms(chain, profile, policy, pt.u).map_err(|e| match e {
            crate::Error::Qloop(e) => e,
            other => qloop::Error::Incompatible(other.to_string()),
        })?;
        worst = worst.max(residuals(chain, &terms).0);
    }
    Ok(worst)
}

/// The four-parameter relation for T~, the three-term relation for T_mu, and both
/// special cases at mu = (alpha - beta)/2 - 1.
#[allow(clippy::too_many_arguments)]
pub fn check_tt(
    alpha: C64,
    beta: C64,
    gamma: C64,
    delta: C64,
    pt: SpectralPoint,
    chain: &ChainSpec,
    profile: &CalibrationProfile,
    policy: &TruncationPolicy,
) -> Result<RelationReport> {
    let ev = Evaluator::new(chain, profile, policy);
    let u = pt.u;
    let s = ev.s();
    let idx = |a: C64, b: C64| (a - b) / 2.0 - 1.0;
    let arg = |a: C64, b: C64| u + (a + b) / (2.0 * s);
    let tt = |a: C64, b: C64| ev.t_tilde(idx(a, b), arg(a, b));
    let tm = |a: C64, b: C64| ev.t_mu(idx(a, b), arg(a, b));
    let mut col = Collector::new(chain);

    col.add("tt_tilde", &[tt(alpha, beta)?.mul(&tt(gamma, delta)?), tt(gamma, beta)?.mul(&tt(alpha, delta)?).neg()]);
    col.add(
        "tt_general",
        &[
            tm(alpha, beta)?.mul(&tm(gamma, delta)?),
            tm(alpha, gamma)?.mul(&tm(beta, delta)?).neg(),
            tm(beta, gamma)?.mul(&tm(alpha, delta)?),
        ],
    );

    let mu = idx(alpha, beta);
    col.add(
        "tt_box1",
        &[
            ev.t_mu(mu, u + 1.0 / s)?.mul(&ev.t_mu(mu, u - 1.0 / s)?),
            ev.identity().neg(),
            ev.t_mu(mu - 1.0, u)?.mul(&ev.t_mu(mu + 1.0, u)?).neg(),
        ],
    );
    col.add(
        "tt_box2",
        &[
            ev.t_finite(1, u)?.mul(&ev.t_mu(mu, u - (mu + 1.0) / s)?),
            ev.t_mu(mu + 1.0, u - mu / s)?.neg(),
            ev.t_mu(mu - 1.0, u - (mu + 2.0) / s)?.neg(),
        ],
    );
    Ok(col
        .finish("tt", pt, policy)
        .with_complex("alpha", alpha)
        .with_complex("beta", beta)
        .with_complex("gamma", gamma)
        .with_complex("delta", delta))
}

/// The diagonal factor q^{xi(h1)(h1 + 2 phi)/2} relating shifted and unshifted Q-operators.
pub fn shift_factor(chain: &ChainSpec, xi: ShiftWeight) -> DMatrix<C64> {
    let qs = chain.qs;
    let phi = chain.twist_phi;
    chain.diagonal(|w| qs.pow(xi.xi_h1 * (w + 2.0 * phi) / 2.0))
}

/// Q from the shifted Borel representation against Q times the diagonal shift factor.
pub fn check_shift_relation(
    xi: ShiftWeight,
    pt: SpectralPoint,
    chain: &ChainSpec,
    profile: &CalibrationProfile,
    policy: &TruncationPolicy,
) -> Result<RelationReport> {
    let ev = Evaluator::new(chain, profile, policy);
    let u = pt.u;
    let mut col = Collector::new(chain);
    col.add("shifted_q", &[ev.q_shifted(xi, u)?, ev.q(u)?.mul(&Term::exact(shift_factor(chain, xi))).neg()]);
    Ok(col.finish("shifted_q", pt, policy).with_complex("xi_h0", xi.xi_h0))
}

/// Multiplicities of h1 weights -2(j+1), j = 0..=level, in a list of weights.
fn level_counts(weights: impl Iterator<Item = C64>, level: usize) -> std::result::Result<Vec<u64>, String> {
    let mut counts = vec![0u64; level + 1];
    for w in weights {
        let r = w.re.round();
        if (w - C64::new(r, 0.0)).norm() > 1e-9 {
            return Err(format!("non-integral weight {w}"));
        }
        let j = -(r as i64) / 2 - 1;
        if r as i64 % 2 == 0 && (0..=level as i64).contains(&j) {
            counts[j as usize] += 1;
        }
    }
    Ok(counts)
}

/// Graded character of the tensor product of the two Fock-type Borel modules against the
/// sum of the characters of the shifted Verma modules, coefficient by coefficient up to
/// `level`. The residual is the total absolute difference of multiplicities.
pub fn character_identity(qs: &QScalar, mu: C64, level: usize, g: Grading) -> Result<RelationReport> {
    let policy = TruncationPolicy { n_max: level + 1, ..TruncationPolicy::default() };
    let pt = SpectralPoint::new(C64::new(0.0, 0.0));
    let wp = rho_plus(qs, pt, g, &policy);
    let wm = rho_bar_minus(qs, pt, g, &policy);
    let lhs_weights = wp.space.tensor(&wm.space).weights;
    let lhs = level_counts(lhs_weights.iter().map(|w| w.h1), level).map_err(crate::Error::Config)?;
    let mut rhs_weights = Vec::new();
    for k in 0..=level {
        let xi = ShiftWeight::from_h0(mu + 2.0 * k as f64 + 2.0);
        let v = shift_rep(&jimbo_eval(qs, EvalWeight::Generic(mu), pt, g, &policy), xi)?;
        rhs_weights.extend(v.space.weights.iter().map(|w| w.h1));
    }
    let rhs = level_counts(rhs_weights.into_iter(), level).map_err(crate::Error::Config)?;
    let closed: Vec<u64> = (0..=level as u64).map(|j| j + 1).collect();
    let diff: u64 = lhs.iter().zip(&rhs).map(|(a, b)| a.abs_diff(*b)).sum();
    let closed_diff: u64 = lhs.iter().zip(&closed).map(|(a, b)| a.abs_diff(*b)).sum();
    let mut comps = BTreeMap::new();
    comps.insert("tensor_vs_verma_sum".to_string(), diff as f64);
    comps.insert("tensor_vs_closed_form".to_string(), closed_diff as f64);
    Ok(RelationReport::from_components("character", comps, 0.0, 0.0)
        .with_complex("mu", mu)
        .with_param("level", level)
        .with_param("lhs", &lhs)
        .with_param("rhs", &rhs))
}

/// Right eigenvectors of a matrix with simple spectrum, as columns, found as the
/// smallest right singular vectors of A - lambda.
pub fn eigenvectors(a: &DMatrix<C64>) -> (Vec<C64>, DMatrix<C64>) {
    let ev = qloop::chainops::eigenvalues(a);
    let n = a.nrows();
    let mut v = DMatrix::zeros(n, ev.len());
    for (k, lam) in ev.iter().enumerate() {
        let shifted = a - DMatrix::<C64>::identity(n, n) * *lam;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.expect("right singular vectors");
        let (imin, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |m, (i, &s)| if s < m.1 { (i, s) } else { m });
        for r in 0..n {
            v[(r, k)] = vt[(imin, r)].conj();
        }
    }
    (ev, v)
}

/// The scalar TQ relation on each common eigenvector: t_k q_k(zeta) = q^phi q_k(q^{2/s} zeta)
/// + q^{-phi} q_k(q^{-2/s} zeta). Eigenvectors come from a generic combination of commuting
/// operators; the residual also records how far each operator is from acting as a scalar on them.
pub fn check_tq_eigen(pt: SpectralPoint, chain: &ChainSpec, profile: &CalibrationProfile, policy: &TruncationPolicy) -> Result<RelationReport> {
    let ev = Evaluator::new(chain, profile, policy);
    let u = pt.u;
    let s = ev.s();
    let phi = chain.twist_phi;
    let t = ev.t_finite(1, u)?.mat;
    let q0 = ev.q(u)?.mat;
    let qp = ev.q(u + 2.0 / s)?.mat;
    let qm = ev.q(u - 2.0 / s)?.mat;
    let generic = &q0 + &t * C64::new(0.37, 0.11) + ev.q_bar(u + 0.23)?.mat * C64::new(-0.19, 0.29);
    let (_, v) = eigenvectors(&generic);
    let mut eig_res: f64 = 0.0;
    let mut vec_res: f64 = 0.0;
    for k in 0..v.ncols() {
        let x = v.column(k).into_owned();
        let nrm = x.norm_squared();
        let mut vals = Vec::new();
        for m in [&t, &q0, &qp, &qm] {
            let y = m * &x;
            let lam = x.dotc(&y) / nrm;
            vec_res = vec_res.max((y - &x * lam).norm() / (m.norm() * nrm.sqrt()));
            vals.push(lam);
        }
        let terms = [vals[0] * vals[1], -ev.qp(phi) * vals[2], -ev.qp(-phi) * vals[3]];
        let scale = terms.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let sum: C64 = terms.iter().sum();
        if scale > 0.0 {
            eig_res = eig_res.max(sum.norm() / scale);
        }
    }
    let mut comps = BTreeMap::new();
    comps.insert("tq_eigenvalues".to_string(), eig_res);
    comps.insert("common_eigenvectors".to_string(), vec_res);
    Ok(RelationReport::from_components("tq_eigen", comps, 0.0, policy.tol)
        .with_complex("u", u)
        .with_complex("phi", phi)
        .with_param("L", chain.len()))
}
