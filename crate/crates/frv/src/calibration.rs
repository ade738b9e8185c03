//! Scalar normalization of the solved L-operators.
//!
//! Every L-operator is solved up to a scalar function of the spectral argument.
//! The profile below fixes those functions from single-site data only. The
//! factorization of the Verma transfer matrix into Q and Q-bar gives the Verma
//! factors in terms of the Q factors. The requirement T_0 = 1 fixes a quasi-periodic
//! combination of the Q and Q-bar factors; the Q factor is asked to tend to 1 deep
//! inside the convergent direction. Once fitted, the profile is frozen and reused on
//! longer chains as a per-site product.

use crate::{Error, Result};
use nalgebra::{DMatrix, Matrix2, Vector2};
use qloop::chainops::{
    aux_trace, q_bar_operator, q_operator, q_operator_shifted, transfer_t_finite, AuxFamily, ChainSpec,
    SiteNormalization, TopCorner,
};
use qloop::representations::ShiftWeight;
use qloop::{Grading, QScalar, SpectralPoint, TruncationPolicy, C64};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Mutex;

/// Relative disagreement allowed between the two diagonal entries of a single-site ratio.
const RATIO_TOL: f64 = 1e-8;
/// The infinite products stop once |q^w|^s drops below this.
const PRODUCT_CUTOFF: f64 = 1e-12;
const MAX_FACTORS: usize = 2000;

/// Cache keys snap arguments to a grid of 2^-40, so that arguments reached along
/// different floating-point paths share one value. A value is computed at the argument
/// of its first request; a profile must therefore be queried in a fixed order (one
/// thread per profile) for results to be reproducible bit for bit.
const KEY_SCALE: f64 = (1u64 << 40) as f64;

type Arg = [i64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    Raw(u8, Arg, Arg),
    Ratio(Arg, Arg),
    P(Arg),
    B(Arg),
    Finite(u32, Arg),
    Shift(Arg, Arg),
}

fn arg(z: C64) -> Arg {
    [(z.re * KEY_SCALE).round() as i64, (z.im * KEY_SCALE).round() as i64]
}

/// One grid sample of the fitted scalar functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub u: [f64; 2],
    pub g_q: [f64; 2],
    pub g_qbar: [f64; 2],
    pub g_t0: [f64; 2],
}

/// Single-site scalar normalizations for every auxiliary family.
pub struct CalibrationProfile {
    chain: ChainSpec,
    policy: TruncationPolicy,
    pub samples: Vec<ProfileSample>,
    cache: Mutex<HashMap<Key, Vec<C64>>>,
}

impl std::fmt::Debug for CalibrationProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CalibrationProfile").field("chain", &self.chain).field("samples", &self.samples.len()).finish()
    }
}

fn diag_ratio(num: &DMatrix<C64>, den: &DMatrix<C64>, what: &str) -> qloop::Result<C64> {
    let r0 = num[(0, 0)] / den[(0, 0)];
    let r1 = num[(1, 1)] / den[(1, 1)];
    if !r0.is_finite() || (r0 - r1).norm() > RATIO_TOL * r0.norm() {
        return Err(qloop::Error::Incompatible(format!(
            "{what}: single-site ratio is not a scalar ({r0} vs {r1})"
        )));
    }
    Ok(r0)
}

impl CalibrationProfile {
    /// An unfitted profile on a single-site chain; values are computed lazily.
    pub fn new(chain_l1: &ChainSpec, policy: &TruncationPolicy) -> Result<Self> {
        if chain_l1.len() != 1 {
            return Err(Error::Config("calibration needs a single-site chain".into()));
        }
        let chain = ChainSpec::new(chain_l1.qs, 1, chain_l1.twist_phi, chain_l1.grading)?;
        Ok(Self { chain, policy: policy.clone(), samples: Vec::new(), cache: Mutex::new(HashMap::new()) })
    }

    pub fn qs(&self) -> QScalar {
        self.chain.qs
    }

    pub fn phi(&self) -> C64 {
        self.chain.twist_phi
    }

    pub fn grading(&self) -> Grading {
        self.chain.grading
    }

    fn s(&self) -> f64 {
        self.chain.grading.sf()
    }

    fn cached(&self, key: Key, f: impl FnOnce() -> qloop::Result<Vec<C64>>) -> qloop::Result<Vec<C64>> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = f()?;
        self.cache.lock().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }

    fn c_diag(&self) -> DMatrix<C64> {
        let qs = self.chain.qs;
        let phi = self.chain.twist_phi;
        self.chain.diagonal(|w| qs.pow((w + 2.0 * phi) / 2.0) - qs.pow(-(w + 2.0 * phi) / 2.0))
    }

    /// Cached single-site diagonal, stored as its two entries.
    fn raw(&self, key: Key, f: impl FnOnce() -> qloop::Result<DMatrix<C64>>) -> qloop::Result<DMatrix<C64>> {
        let v = self.cached(key, || {
            let m = f()?;
            Ok(vec![m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]])
        })?;
        Ok(DMatrix::from_row_slice(2, 2, &v))
    }

    fn raw_q(&self, u: C64) -> qloop::Result<DMatrix<C64>> {
        self.raw(Key::Raw(0, [0, 0], arg(u)), || {
            Ok(q_operator(SpectralPoint::new(u), &self.chain, &self.policy, &TopCorner)?.matrix.mat)
        })
    }

    fn raw_qbar(&self, u: C64) -> qloop::Result<DMatrix<C64>> {
        self.raw(Key::Raw(1, [0, 0], arg(u)), || {
            Ok(q_bar_operator(SpectralPoint::new(u), &self.chain, &self.policy, &TopCorner)?.matrix.mat)
        })
    }

    fn raw_verma(&self, mu: C64, u: C64) -> qloop::Result<DMatrix<C64>> {
        self.raw(Key::Raw(2, arg(mu), arg(u)), || Ok(aux_trace(&AuxFamily::Verma(mu), u, &self.chain, &self.policy)?.0))
    }

    /// Ratio of the factorized form of the Verma trace to the raw Verma trace at one site.
    pub fn verma_ratio(&self, mu: C64, x: C64) -> qloop::Result<C64> {
        let v = self.cached(Key::Ratio(arg(mu), arg(x)), || {
            let qs = self.chain.qs;
            let sh = (mu + 1.0) / self.s();
            let rhs = self.c_diag() * self.raw_q(x + sh)? * self.raw_qbar(x - sh)? * qs.pow((mu + 1.0) * self.chain.twist_phi);
            let t = self.raw_verma(mu, x)?;
            Ok(vec![diag_ratio(&rhs, &t, "factorization")?])
        })?;
        Ok(v[0])
    }

    /// The pair (P, P') with P = a0 / r_0 and P' = a2 / r_{-2}, where a0 T~_0 - a2 T~_{-2} = 1.
    fn p_pair(&self, x: C64) -> qloop::Result<(C64, C64)> {
        let v = self.cached(Key::P(arg(x)), || {
            let t0 = self.raw_verma(C64::new(0.0, 0.0), x)?;
            let t2 = self.raw_verma(C64::new(-2.0, 0.0), x)?;
            let a = Matrix2::new(t0[(0, 0)], -t2[(0, 0)], t0[(1, 1)], -t2[(1, 1)]);
            let sol = a
                .lu()
                .solve(&Vector2::new(C64::new(1.0, 0.0), C64::new(1.0, 0.0)))
                .ok_or_else(|| qloop::Error::Incompatible(format!("identity normalization is singular at {x}")))?;
            Ok(vec![sol[0] / self.verma_ratio(C64::new(0.0, 0.0), x)?, sol[1] / self.verma_ratio(C64::new(-2.0, 0.0), x)?])
        })?;
        Ok((v[0], v[1]))
    }

    /// K(w) = b(w + 4/s) / b(w).
    pub fn k_step(&self, w: C64) -> qloop::Result<C64> {
        let s = self.s();
        Ok(self.p_pair(w + 3.0 / s)?.0 / self.p_pair(w + 1.0 / s)?.1)
    }

    /// Normalization of the Q-operator L-factor.
    pub fn g_q(&self, w: C64) -> qloop::Result<C64> {
        let v = self.cached(Key::B(arg(w)), || {
            let qs = self.chain.qs;
            let s = self.s();
            let step = 4.0 / s;
            let forward = qs.hbar().re < 0.0;
            let mut p = C64::new(1.0, 0.0);
            for k in 0..MAX_FACTORS {
                let ww = if forward { w + step * k as f64 } else { w - step * (k + 1) as f64 };
                if qs.pow(ww).norm().powf(s) < PRODUCT_CUTOFF {
                    return Ok(vec![p]);
                }
                p = if forward { p / self.k_step(ww)? } else { p * self.k_step(ww)? };
            }
            Err(qloop::Error::Incompatible(format!("normalization product did not settle at {w}")))
        })?;
        Ok(v[0])
    }

    /// Normalization of the Q-bar L-factor.
    pub fn g_qbar(&self, z: C64) -> qloop::Result<C64> {
        let s = self.s();
        Ok(self.p_pair(z + 1.0 / s)?.0 / self.g_q(z + 2.0 / s)?)
    }

    /// Normalization of the Verma L-factor.
    pub fn g_verma(&self, mu: C64, x: C64) -> qloop::Result<C64> {
        let sh = (mu + 1.0) / self.s();
        Ok(self.verma_ratio(mu, x)? * self.g_q(x + sh)? * self.g_qbar(x - sh)?)
    }

    /// Normalization of the finite-dimensional L-factor, from T_m = T~_m - T~_{-m-2} at one site.
    pub fn g_finite(&self, m: u32, x: C64) -> qloop::Result<C64> {
        if m == 0 {
            return Ok(C64::new(1.0, 0.0));
        }
        let v = self.cached(Key::Finite(m, arg(x)), || {
            let mu = C64::new(m as f64, 0.0);
            let nu = -mu - 2.0;
            let t = self.raw_verma(mu, x)? * self.g_verma(mu, x)? - self.raw_verma(nu, x)? * self.g_verma(nu, x)?;
            let f = transfer_t_finite(m, SpectralPoint::new(x), &self.chain, &TopCorner)?;
            Ok(vec![diag_ratio(&t, f.mat(), "finite-dimensional normalization")?])
        })?;
        Ok(v[0])
    }

    /// Normalization of the shifted Q-operator L-factor, from the unshifted one times the
    /// Cartan factor at one site.
    pub fn g_shifted(&self, xi: ShiftWeight, x: C64) -> qloop::Result<C64> {
        let v = self.cached(Key::Shift(arg(xi.xi_h0), arg(x)), || {
            let qs = self.chain.qs;
            let phi = self.chain.twist_phi;
            let target = self.raw_q(x)? * self.chain.diagonal(|w| qs.pow(xi.xi_h1 * (w + 2.0 * phi) / 2.0)) * self.g_q(x)?;
            let raw = q_operator_shifted(xi, SpectralPoint::new(x), &self.chain, &self.policy, &TopCorner)?;
            Ok(vec![diag_ratio(&target, raw.mat(), "shifted normalization")?])
        })?;
        Ok(v[0])
    }

    fn sample(&self, u: C64) -> qloop::Result<ProfileSample> {
        let c = |z: C64| [z.re, z.im];
        Ok(ProfileSample {
            u: c(u),
            g_q: c(self.g_q(u)?),
            g_qbar: c(self.g_qbar(u)?),
            g_t0: c(self.g_verma(C64::new(0.0, 0.0), u)?),
        })
    }
}

impl SiteNormalization for CalibrationProfile {
    fn site_factor(&self, family: &AuxFamily, x: C64) -> qloop::Result<C64> {
        match *family {
            AuxFamily::Verma(mu) => self.g_verma(mu, x),
            AuxFamily::Finite(m) => self.g_finite(m, x),
            AuxFamily::RhoPlus => self.g_q(x),
            AuxFamily::RhoBarMinus => self.g_qbar(x),
            AuxFamily::ShiftedRhoPlus(xi) => self.g_shifted(xi, x),
        }
    }
}

/// Largest relative second difference of a sampled function on a uniform real grid,
/// scaled by the local magnitude. Small values indicate a smooth profile.
pub fn roughness(values: &[C64]) -> f64 {
    values
        .windows(3)
        .map(|w| (w[0] - 2.0 * w[1] + w[2]).norm() / (w[0].norm() + w[1].norm() + w[2].norm()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Fit the profile at L = 1 and validate it on the grid: the factorization and the
/// Wronskian must hold exactly at one site.
pub fn calibrate(chain_l1: &ChainSpec, grid: &[SpectralPoint], policy: &TruncationPolicy) -> Result<CalibrationProfile> {
    let mut profile = CalibrationProfile::new(chain_l1, policy)?;
    let fail = |e: qloop::Error| Error::CalibrationFailed(e.to_string());
    let mut samples = Vec::with_capacity(grid.len());
    for pt in grid {
        samples.push(profile.sample(pt.u).map_err(fail)?);
    }
    let w = crate::relations::check_wronskian_at(&profile.chain, &profile, policy, grid).map_err(fail)?;
    if w > 1e-10 {
        return Err(Error::CalibrationFailed(format!("single-site Wronskian residual {w:.3e}")));
    }
    profile.samples = samples;
    Ok(profile)
}
