//! Closed-form trace functionals on highest-weight and Fock modules. Truncated numeric
//! traces come with measured geometric tail bounds.

use crate::qcore::{LinOp, QScalar, TruncationPolicy};
use crate::{cr, Error, Result, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

const POLE_EPS: f64 = 1e-13;

/// A convergence predicate together with whether it holds for given inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRegion {
    pub condition: String,
    pub satisfied: bool,
}

impl TraceRegion {
    /// Region of the Verma trace with twist q^{nu H}: |q^{-2 nu}| < 1.
    pub fn verma(qs: &QScalar, nu: C64) -> Self {
        Self { condition: "|q^(-2 nu)| < 1".into(), satisfied: qs.pow(-2.0 * nu).norm() < 1.0 }
    }

    /// Region of the Fock traces with twist q^{nu N}: |q^nu| < 1 for W^+, |q^-nu| < 1 for W^-.
    pub fn oscillator(qs: &QScalar, sign: Sign, nu: C64) -> Self {
        match sign {
            Sign::Plus => Self { condition: "|q^nu| < 1".into(), satisfied: qs.pow(nu).norm() < 1.0 },
            Sign::Minus => Self { condition: "|q^(-nu)| < 1".into(), satisfied: qs.pow(-nu).norm() < 1.0 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

fn casimir_value(qs: &QScalar, mu: C64) -> C64 {
    let k = qs.kappa();
    (qs.pow(mu + 1.0) + qs.pow(-mu - 1.0)) / (k * k)
}

/// tr~_mu(C^j q^{nu H}) = kappa^{-2j} (q^{mu+1} + q^{-mu-1})^j q^{nu mu} / (1 - q^{-2 nu}).
pub fn trace_verma_closed(qs: &QScalar, mu: C64, j: u32, nu: C64) -> Result<C64> {
    let den = 1.0 - qs.pow(-2.0 * nu);
    if den.norm() < POLE_EPS {
        return Err(Error::Pole(format!("Verma trace at nu = {nu}")));
    }
    Ok(casimir_value(qs, mu).powu(j) * qs.pow(nu * mu) / den)
}

/// tr_m(C^j q^{nu H}) = kappa^{-2j} (q^{m+1} + q^{-m-1})^j [m+1]_{q^nu}.
pub fn trace_findim_closed(qs: &QScalar, m: u32, j: u32, nu: C64) -> C64 {
    // [m+1]_{q^nu} as the finite sum of q^{nu(m-2n)}, which has no pole at nu = 0
    let sum: C64 = (0..=m).map(|n| qs.pow(nu * (m as f64 - 2.0 * n as f64))).sum();
    casimir_value(qs, cr(m as f64)).powu(j) * sum
}

/// tr_mu = tr~_mu - tr~_{-mu-2}.
pub fn trace_mu(qs: &QScalar, mu: C64, j: u32, nu: C64) -> Result<C64> {
    Ok(trace_verma_closed(qs, mu, j, nu)? - trace_verma_closed(qs, -mu - 2.0, j, nu)?)
}

/// tr_+(q^{nu N}) = 1/(1 - q^nu), tr_- = -tr_+.
pub fn trace_osc_closed(qs: &QScalar, sign: Sign, nu: C64) -> Result<C64> {
    let den = 1.0 - qs.pow(nu);
    if den.norm() < POLE_EPS {
        return Err(Error::Pole(format!("oscillator trace at nu = {nu}")));
    }
    Ok(match sign {
        Sign::Plus => 1.0 / den,
        Sign::Minus => -1.0 / den,
    })
}

/// Largest ratio |t_{k+1}/t_k| over the last quarter of a term sequence, skipping
/// zero terms. Returns 0 when fewer than two nonzero terms are available.
fn measured_ratio(terms: &[C64]) -> f64 {
    let n = terms.len();
    if n < 2 {
        return 0.0;
    }
    let start = (3 * n / 4).min(n - 2);
    let mut r: f64 = 0.0;
    for k in start..n - 1 {
        let (a, b) = (terms[k].norm(), terms[k + 1].norm());
        if a > 0.0 {
            r = r.max(b / a);
        } else if b > 0.0 {
            r = f64::INFINITY;
        }
    }
    r
}

const ROUNDING_FLOOR: f64 = 1e-14;

/// Geometric tail estimate for a partial sum with the given terms.
/// Returns (tail bound, ratio); the ratio is checked against 1 by the caller.
fn geometric_tail(terms: &[C64], damping: &[C64]) -> (f64, f64) {
    // decay of the damping alone, independent of the operator entries
    let dr = measured_ratio(damping);
    // trailing terms at the rounding floor carry no information about the decay
    let floor = ROUNDING_FLOOR * terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    let keep = terms.iter().rposition(|t| t.norm() > floor).map_or(0, |k| k + 1);
    let terms = &terms[..keep];
    let r = measured_ratio(terms).max(dr);
    let last = terms.last().map_or(0.0, |t| t.norm());
    if r >= 1.0 {
        return (f64::INFINITY, r);
    }
    // a relative margin absorbs rounding in the measured ratio
    (last * r / (1.0 - r) * (1.0 + 1e-9), r)
}

/// Partial trace sum_n op[n,n] damping[n] over the basis vectors at least `buffer`
/// steps from a truncation cutoff, with a tail bound from the measured decay of the terms.
/// The sum is accepted only when the bound is below the tolerance.
pub fn truncated_trace(op: &LinOp, damping: &[C64], buffer: usize, policy: &TruncationPolicy) -> Result<(C64, f64)> {
    if !op.is_square() || damping.len() != op.mat.nrows() {
        return Err(Error::DimensionMismatch("trace needs a square operator and one damping entry per basis vector".into()));
    }
    let idx = op.domain.interior(buffer);
    let terms: Vec<C64> = idx.iter().map(|&i| op.mat[(i, i)] * damping[i]).collect();
    let damp: Vec<C64> = idx.iter().map(|&i| damping[i]).collect();
    let (tail, r) = geometric_tail(&terms, &damp);
    if r >= 1.0 {
        return Err(Error::DivergentTrace { ratio: r });
    }
    let value: C64 = terms.iter().sum();
    if tail > policy.tol * value.norm().max(1.0) {
        return Err(Error::TruncationTooSmall(format!("tail bound {tail:.3e} exceeds the tolerance at n_max = {}", policy.n_max)));
    }
    Ok((value, tail))
}

/// Partial trace over the first tensor factor of an operator on aux (x) quantum,
/// keeping aux labels `0..n_keep` and applying `damping` on the auxiliary index.
/// Returns the matrix on the quantum space and the largest entrywise tail bound.
pub fn truncated_partial_trace(
    mat: &DMatrix<C64>,
    aux_dim: usize,
    n_keep: usize,
    damping: &[C64],
) -> Result<(DMatrix<C64>, f64)> {
    let dq = mat.nrows() / aux_dim;
    if mat.nrows() != aux_dim * dq || damping.len() < n_keep || n_keep > aux_dim {
        return Err(Error::DimensionMismatch("partial trace dimensions".into()));
    }
    let mut out = DMatrix::zeros(dq, dq);
    let mut tail: f64 = 0.0;
    let damp = &damping[..n_keep];
    for i in 0..dq {
        for j in 0..dq {
            let terms: Vec<C64> = (0..n_keep).map(|n| mat[(n * dq + i, n * dq + j)] * damping[n]).collect();
            let (t, r) = geometric_tail(&terms, damp);
            if r >= 1.0 {
                return Err(Error::DivergentTrace { ratio: r });
            }
            tail = tail.max(t);
            out[(i, j)] = terms.iter().sum();
        }
    }
    Ok((out, tail))
}
