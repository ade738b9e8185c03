//! Run configuration: a flat JSON object whose keys can all be overridden on the command line.

use crate::{Error, Result};
use qloop::chainops::ChainSpec;
use qloop::{Grading, QScalar, SpectralPoint, TruncationPolicy, C64};
use serde::{Deserialize, Serialize};

/// A spectral value given either as a real number or as a [re, im] pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CNum {
    Re(f64),
    Pair([f64; 2]),
}

impl CNum {
    pub fn value(&self) -> C64 {
        match *self {
            CNum::Re(x) => C64::new(x, 0.0),
            CNum::Pair([a, b]) => C64::new(a, b),
        }
    }
}

pub const SUITES: [&str; 8] =
    ["algebra-checks", "isomorphisms", "traces", "rmatrix", "operators", "calibrate", "relations", "scan"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub hbar_re: f64,
    pub hbar_im: f64,
    pub s0: u32,
    pub s1: u32,
    pub phi_re: f64,
    pub phi_im: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub n_max: usize,
    pub tol: f64,
    pub seed: u64,
    pub grid: Vec<CNum>,
    pub inhomogeneities: Option<Vec<CNum>>,
    pub suites: Vec<String>,
    /// Random draws per representation family and per trace family.
    pub draws: usize,
    /// Random parameter tuples per relation family.
    pub relation_draws: usize,
    pub dump_operators: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hbar_re: -0.35,
            hbar_im: 0.21,
            s0: 1,
            s1: 1,
            phi_re: 1.3,
            phi_im: 0.4,
            l: 2,
            n_max: 40,
            tol: 1e-8,
            seed: 0,
            grid: vec![CNum::Re(0.1), CNum::Re(0.3), CNum::Re(0.5)],
            inhomogeneities: None,
            suites: SUITES.iter().filter(|s| **s != "scan").map(|s| s.to_string()).collect(),
            draws: 50,
            relation_draws: 10,
            dump_operators: false,
        }
    }
}

/// Parse `a:b:count` into `count` evenly spaced real values from a to b inclusive.
pub fn parse_grid(spec: &str) -> Result<Vec<CNum>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("grid must be a:b:count, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![CNum::Re(a)]);
    }
    Ok((0..n).map(|k| CNum::Re(a + (b - a) * k as f64 / (n - 1) as f64)).collect())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn qs(&self) -> Result<QScalar> {
        QScalar::new(C64::new(self.hbar_re, self.hbar_im)).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn phi(&self) -> C64 {
        C64::new(self.phi_re, self.phi_im)
    }

    pub fn grading(&self) -> Result<Grading> {
        Grading::new(self.s0, self.s1).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn policy(&self) -> Result<TruncationPolicy> {
        TruncationPolicy::new(self.n_max, self.tol).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn grid_points(&self) -> Vec<SpectralPoint> {
        self.grid.iter().map(|c| SpectralPoint::new(c.value())).collect()
    }

    /// The chain of `l` sites with the configured inhomogeneities (all zero by default).
    pub fn chain(&self, l: usize) -> Result<ChainSpec> {
        let sites = match &self.inhomogeneities {
            None => vec![SpectralPoint::new(C64::new(0.0, 0.0)); l],
            Some(v) if v.len() >= l => v[..l].iter().map(|c| SpectralPoint::new(c.value())).collect(),
            Some(v) => {
                return Err(Error::Config(format!("{} inhomogeneities given for a chain of length {l}", v.len())));
            }
        };
        Ok(ChainSpec::with_sites(self.qs()?, sites, self.phi(), self.grading()?)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.qs()?;
        self.grading()?;
        self.policy()?;
        if !(1..=6).contains(&self.l) {
            return Err(Error::Config(format!("L = {} is outside 1..=6", self.l)));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("the grid is empty".into()));
        }
        for s in &self.suites {
            if !SUITES.contains(&s.as_str()) {
                return Err(Error::Config(format!("unknown suite {s:?}; expected one of {}", SUITES.join(", "))));
            }
        }
        if self.suites.iter().any(|s| matches!(s.as_str(), "operators" | "calibrate" | "relations" | "scan")) {
            self.chain(self.l)?;
        }
        Ok(())
    }
}
