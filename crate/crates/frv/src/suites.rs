//! Check suites run by the `frv` binary and their output files.

use crate::calibration::{calibrate, roughness, CalibrationProfile};
use crate::config::RunConfig;
use crate::relations::{
    character_identity, check_factorization, check_shift_relation, check_tq, check_tq_bar, check_tq_eigen,
    check_tq_general, check_tt, check_wronskian, residuals, Evaluator, Term,
};
use crate::{Error, Result};
use nalgebra::DMatrix;
use qloop::algebras::{casimir, check_relations, perturb_generator, AlgebraTag, Gen, RepTable};
use qloop::chainops::{
    commutator_residual, eigenvalues, off_sector_norm, q_bar_operator, q_operator, transfer_t_finite, transfer_t_mu,
    transfer_t_tilde, ChainSpec, TopCorner,
};
use qloop::intertwiners::{matrix_json, solve_intertwiner, yang_baxter_check};
use qloop::representations::{
    classify_generalized, conjugation_residual, finite_dim, finite_dim_eval, generalized_rep, highest_weight,
    jimbo_eval, osc_fock_minus, osc_fock_plus, osc_general, osc_quotient_check, rho_bar_minus, rho_bar_minus_mu,
    rho_bar_minus_mu_isomorphism_check, rho_bar_minus_via_oscillator, rho_plus, rho_plus_mu,
    rho_plus_mu_isomorphism_check, rho_plus_mu_limit_distance, rho_plus_via_oscillator, shift_isomorphism_check,
    shift_rep, verma_general, EvalWeight, GeneralizedRepSpec, ShiftWeight,
};
use qloop::traces::{trace_findim_closed, trace_osc_closed, trace_verma_closed, truncated_trace, Sign};
use qloop::{Grading, LinOp, QScalar, RelationReport, SpectralPoint, TruncationPolicy, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

/// Frozen identifier of the report format.
pub fn report_schema_version() -> &'static str {
    "frv-report/1"
}

/// One line of the report stream.
#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub schema: &'static str,
    pub suite: String,
    pub index: usize,
    #[serde(flatten)]
    pub report: RelationReport,
}

/// One eigenvalue of one operator at one spectral point.
#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub operator: String,
    #[serde(rename = "L")]
    pub l: usize,
    pub u_re: f64,
    pub u_im: f64,
    pub index: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub records: Vec<Record>,
    pub scan: Vec<ScanRow>,
    pub operators: Vec<(String, serde_json::Value)>,
}

impl RunOutput {
    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.report.passed())
    }

    fn extend(&mut self, suite: &str, reports: Vec<RelationReport>) {
        let base = self.records.iter().filter(|r| r.suite == suite).count();
        for (i, report) in reports.into_iter().enumerate() {
            self.records.push(Record { schema: report_schema_version(), suite: suite.to_string(), index: base + i, report });
        }
    }
}

/// Draws for one suite, seeded from the run seed and the suite name so that suites are
/// independent of each other and of their order.
fn suite_rng(seed: u64, suite: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in suite.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn cplx<R: Rng>(rng: &mut R, re: (f64, f64), im: (f64, f64)) -> C64 {
    C64::new(rng.gen_range(re.0..re.1), rng.gen_range(im.0..im.1))
}

/// A random deformation parameter with 0.5 < |q| < 0.95.
fn random_q<R: Rng>(rng: &mut R) -> QScalar {
    let r: f64 = rng.gen_range(0.5f64..0.95);
    let theta: f64 = rng.gen_range(-3.0..3.0);
    QScalar::new(C64::new(r.ln(), theta)).expect("valid q")
}

fn count_report(id: &str, failures: usize, components: BTreeMap<String, f64>) -> RelationReport {
    let mut r = RelationReport::new(id, failures as f64, 0.0, 0.0);
    r.components = components;
    r
}

/// Run one suite.
pub fn run_suite(name: &str, cfg: &RunConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let mut rng = suite_rng(cfg.seed, name);
    let reports = match name {
        "algebra-checks" => algebra_checks(cfg, &mut rng)?,
        "isomorphisms" => isomorphisms(cfg, &mut rng)?,
        "traces" => traces(cfg, &mut rng)?,
        "rmatrix" => rmatrix(cfg, &mut rng)?,
        "operators" => operators(cfg, &mut rng)?,
        "calibrate" => calibration_suite(cfg)?,
        "relations" => {
            let profile = profile_for(cfg)?;
            relations(cfg, cfg.l, &profile, &mut rng)?
        }
        "scan" => return scan(cfg),
        other => return Err(Error::Config(format!("unknown suite {other:?}"))),
    };
    out.extend(name, reports);
    Ok(out)
}

/// Run all configured suites, in parallel across suites, and merge in configuration order.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let threads = std::env::var("FRV_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let parts: Vec<Result<RunOutput>> = pool.install(|| cfg.suites.par_iter().map(|s| run_suite(s, cfg)).collect());
    let mut out = RunOutput::default();
    for p in parts {
        let p = p?;
        out.records.extend(p.records);
        out.scan.extend(p.scan);
        out.operators.extend(p.operators);
    }
    Ok(out)
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    suite: &'a str,
    index: usize,
    relation_id: &'a str,
    residual: f64,
    tail_bound: f64,
    tolerance: f64,
    verdict: &'a str,
}

/// Write `reports.jsonl`, `summary.csv`, `scan.csv` (when present) and `operators/*.json`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut lines = String::new();
    for r in &out.records {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    std::fs::write(dir.join("reports.jsonl"), lines)?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(|e| Error::Config(e.to_string()))?;
    for r in &out.records {
        let verdict = if r.report.passed() { "pass" } else { "fail" };
        w.serialize(SummaryRow {
            suite: &r.suite,
            index: r.index,
            relation_id: &r.report.relation_id,
            residual: r.report.residual,
            tail_bound: r.report.tail_bound,
            tolerance: r.report.tolerance,
            verdict,
        })
        .map_err(|e| Error::Config(e.to_string()))?;
    }
    w.flush()?;
    if !out.scan.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("scan.csv")).map_err(|e| Error::Config(e.to_string()))?;
        for row in &out.scan {
            w.serialize(row).map_err(|e| Error::Config(e.to_string()))?;
        }
        w.flush()?;
    }
    if !out.operators.is_empty() {
        let od = dir.join("operators");
        std::fs::create_dir_all(&od)?;
        for (name, v) in &out.operators {
            std::fs::write(od.join(format!("{name}.json")), serde_json::to_string_pretty(v)?)?;
        }
    }
    Ok(())
}

fn policy_with_tol(cfg: &RunConfig, tol: f64) -> Result<TruncationPolicy> {
    Ok(TruncationPolicy { tol, ..cfg.policy()? })
}

/// One random member of each representation family.
fn random_reps<R: Rng>(rng: &mut R, policy: &TruncationPolicy) -> Vec<(&'static str, RepTable)> {
    let qs = random_q(rng);
    let g = Grading::new(rng.gen_range(1..3), rng.gen_range(1..3)).expect("grading");
    let pt = SpectralPoint::new(cplx(rng, (-1.0, 1.0), (-0.5, 0.5)));
    let mu = cplx(rng, (-3.0, 3.0), (-1.0, 1.0));
    let lambda = cplx(rng, (-1.0, 1.0), (-1.0, 1.0));
    let m = rng.gen_range(1..6);
    let g1 = cplx(rng, (0.2, 2.0), (-1.0, 1.0));
    let g2 = cplx(rng, (0.2, 2.0), (-1.0, 1.0));
    let spec = GeneralizedRepSpec { delta: cplx(rng, (-2.0, 2.0), (-1.0, 1.0)), gamma0: g1 + g2, gamma1: g1, gamma2: g2, zeta: pt };
    let xi = ShiftWeight::from_h0(cplx(rng, (-2.0, 2.0), (-1.0, 1.0)));
    vec![
        ("verma_general", verma_general(&qs, mu, lambda, policy)),
        ("highest_weight", highest_weight(&qs, mu, policy)),
        ("finite_dim", finite_dim(&qs, m)),
        ("osc_general", osc_general(&qs, lambda, policy)),
        ("osc_fock_plus", osc_fock_plus(&qs, policy)),
        ("osc_fock_minus", osc_fock_minus(&qs, policy)),
        ("evaluation", jimbo_eval(&qs, EvalWeight::Generic(mu), pt, g, policy)),
        ("evaluation_finite", finite_dim_eval(&qs, m, pt, g)),
        ("shifted_evaluation", shift_rep(&jimbo_eval(&qs, EvalWeight::Generic(mu), pt, g, policy), xi).expect("shift")),
        ("rho_plus", rho_plus(&qs, pt, g, policy)),
        ("rho_bar_minus", rho_bar_minus(&qs, pt, g, policy)),
        ("rho_plus_mu", rho_plus_mu(&qs, mu, pt, g, policy)),
        ("rho_bar_minus_mu", rho_bar_minus_mu(&qs, mu, pt, g, policy)),
        ("generalized", generalized_rep(&qs, &spec, g, policy)),
    ]
}

fn generators(rep: &RepTable) -> Vec<Gen> {
    match rep.algebra {
        AlgebraTag::Sl2 => vec![Gen::E, Gen::F],
        AlgebraTag::Osc => vec![Gen::B, Gen::Bdag],
        AlgebraTag::BorelPlus => vec![Gen::E0, Gen::E1],
        AlgebraTag::Loop => vec![Gen::E0, Gen::E1, Gen::F0, Gen::F1],
    }
}

/// Threshold above which a perturbed generator counts as detected.
pub const PERTURBATION_DETECTED: f64 = 1e-3;

fn algebra_checks<R: Rng>(cfg: &RunConfig, rng: &mut R) -> Result<Vec<RelationReport>> {
    let policy = policy_with_tol(cfg, 1e-12)?;
    let mut out = Vec::new();
    for draw in 0..cfg.draws {
        for (family, rep) in random_reps(rng, &policy) {
            out.push(check_relations(&rep, &policy).with_param("family", family).with_param("draw", draw));
            let mut comps = BTreeMap::new();
            let mut missed = 0;
            for g in generators(&rep) {
                let r = check_relations(&perturb_generator(&rep, g, 0.01, rng), &policy).residual;
                if r.is_nan() || r <= PERTURBATION_DETECTED {
                    missed += 1;
                }
                comps.insert(format!("{g:?}"), r);
            }
            out.push(count_report(&format!("perturbation/{family}"), missed, comps).with_param("draw", draw));
        }
    }
    Ok(out)
}

fn isomorphisms<R: Rng>(cfg: &RunConfig, rng: &mut R) -> Result<Vec<RelationReport>> {
    let policy = policy_with_tol(cfg, 1e-10)?;
    let draws = cfg.draws.div_ceil(5).max(1);
    let mut out = Vec::new();
    for draw in 0..draws {
        let qs = random_q(rng);
        let g = Grading::new(rng.gen_range(1..3), rng.gen_range(1..3))?;
        let pt = SpectralPoint::new(cplx(rng, (-1.0, 1.0), (-0.5, 0.5)));
        let mu = cplx(rng, (-3.0, 3.0), (-1.0, 1.0));
        let lambda = cplx(rng, (-1.0, 1.0), (-1.0, 1.0));
        let mut k: i64 = rng.gen_range(-3..4);
        if k == 0 {
            k = 1;
        }
        out.push(shift_isomorphism_check(&qs, mu, lambda, k, &policy)?.with_param("draw", draw).with_complex("hbar", qs.hbar()));
        out.push(osc_quotient_check(&qs, &policy).with_param("draw", draw).with_complex("hbar", qs.hbar()));
        out.push(rho_plus_mu_isomorphism_check(&qs, mu, pt, g, &policy)?.with_param("draw", draw));
        out.push(rho_bar_minus_mu_isomorphism_check(&qs, mu, pt, g, &policy)?.with_param("draw", draw));
        let ones = vec![C64::new(1.0, 0.0); policy.n_max + 1];
        for (id, a, b) in [
            ("oscillator_factorization_plus", rho_plus_via_oscillator(&qs, pt, g, &policy), rho_plus(&qs, pt, g, &policy)),
            (
                "oscillator_factorization_bar_minus",
                rho_bar_minus_via_oscillator(&qs, pt, g, &policy),
                rho_bar_minus(&qs, pt, g, &policy),
            ),
        ] {
            let comps = conjugation_residual(&a, &ones, &b, 1);
            out.push(RelationReport::from_components(id, comps, 0.0, policy.tol).with_param("draw", draw));
        }
        let delta = cplx(rng, (-2.0, 2.0), (-1.0, 1.0));
        let g1 = cplx(rng, (0.2, 2.0), (-1.0, 1.0));
        let g2 = cplx(rng, (0.2, 2.0), (-1.0, 1.0));
        let zero = C64::new(0.0, 0.0);
        for (a, b) in [(g1, g2), (g1, zero), (zero, g2)] {
            let spec = GeneralizedRepSpec { delta, gamma0: a + b, gamma1: a, gamma2: b, zeta: pt };
            out.push(classify_generalized(&qs, &spec, g, &policy)?.1.with_param("draw", draw));
        }
    }
    out.push(rho_plus_limit_report(cfg)?);
    Ok(out)
}

/// Distances between rho^{+,mu} and rho^+ along a ray on which q^{-2 mu} decays; each step
/// must shrink the distance by exactly |q^{-2 dmu}|.
fn rho_plus_limit_report(cfg: &RunConfig) -> Result<RelationReport> {
    let qs = cfg.qs()?;
    let policy = cfg.policy()?;
    let g = cfg.grading()?;
    let h = qs.hbar();
    let dir = h.conj() / h.norm();
    let step = 0.5 * dir;
    let pt = SpectralPoint::new(C64::new(0.2, 0.1));
    let d: Vec<f64> = (0..8).map(|k| rho_plus_mu_limit_distance(&qs, step * k as f64, pt, g, &policy)).collect();
    let predicted = qs.pow(-2.0 * step).norm();
    let mut worst: f64 = 0.0;
    for w in d.windows(2) {
        worst = worst.max((w[1] / w[0] - predicted).abs() / predicted);
    }
    let mut comps = BTreeMap::new();
    comps.insert("ratio_deviation".to_string(), worst);
    comps.insert("decreasing".to_string(), if d.windows(2).all(|w| w[1] < w[0]) { 0.0 } else { 1.0 });
    Ok(RelationReport::from_components("rho_plus_mu_limit", comps, 0.0, 1e-8)
        .with_param("distances", &d)
        .with_param("predicted_ratio", predicted))
}

/// Damping q^{nu h} on the basis of a representation.
fn damping(qs: &QScalar, rep: &RepTable, nu: C64) -> Vec<C64> {
    rep.space.weights.iter().map(|w| qs.pow(nu * w.h1)).collect()
}

fn casimir_power(rep: &RepTable, j: u32) -> Result<LinOp> {
    let c = casimir(rep)?;
    let mut m = DMatrix::identity(rep.dim(), rep.dim());
    for _ in 0..j {
        m = &c.mat * m;
    }
    Ok(LinOp { domain: rep.space.clone(), codomain: rep.space.clone(), mat: m })
}

/// Rounding allowance for comparing a summed trace with a closed form.
fn rounding(value: C64) -> f64 {
    1e-12 * value.norm().max(1.0)
}

fn trace_report(id: &str, closed: C64, value: C64, tail: f64) -> RelationReport {
    let diff = (closed - value).norm();
    RelationReport::new(id, diff, tail, rounding(closed)).with_complex("closed", closed).with_complex("truncated", value)
}

fn traces<R: Rng>(cfg: &RunConfig, rng: &mut R) -> Result<Vec<RelationReport>> {
    let policy = policy_with_tol(cfg, 1e-9)?;
    let draws = 2 * cfg.draws;
    let mut out = Vec::new();
    for draw in 0..draws {
        let qs = random_q(rng);
        let h = qs.hbar();
        // nu with Re(hbar nu) well inside the convergence region
        let a: f64 = rng.gen_range(0.4..1.2);
        let b: f64 = rng.gen_range(-1.0..1.0);
        let nu_verma = C64::new(a, b) / h;
        // oscillator weights step by one instead of two
        let nu_osc = -C64::new(2.0 * a, b) / h;
        let mu = cplx(rng, (-2.0, 2.0), (-1.0, 1.0));
        let j = rng.gen_range(0..3u32);
        let m = rng.gen_range(0..6u32);

        let rep = highest_weight(&qs, mu, &policy);
        let op = casimir_power(&rep, j)?;
        let (value, tail) = truncated_trace(&op, &damping(&qs, &rep, nu_verma), j as usize + 2, &policy)?;
        let closed = trace_verma_closed(&qs, mu, j, nu_verma)?;
        out.push(trace_report("trace/verma", closed, value, tail).with_param("draw", draw));

        let rep = finite_dim(&qs, m as usize);
        let op = casimir_power(&rep, j)?;
        let d = damping(&qs, &rep, nu_verma);
        let exact: C64 = (0..rep.dim()).map(|i| op.mat[(i, i)] * d[i]).sum();
        out.push(trace_report("trace/finite", trace_findim_closed(&qs, m, j, nu_verma), exact, 0.0).with_param("draw", draw));

        let rep = osc_fock_plus(&qs, &policy);
        let op = LinOp::identity(rep.space.clone());
        let (value, tail) = truncated_trace(&op, &damping(&qs, &rep, nu_osc), 1, &policy)?;
        out.push(trace_report("trace/osc_plus", trace_osc_closed(&qs, Sign::Plus, nu_osc)?, value, tail).with_param("draw", draw));

        let rep = osc_fock_minus(&qs, &policy);
        let op = LinOp::identity(rep.space.clone());
        let (value, tail) = truncated_trace(&op, &damping(&qs, &rep, -nu_osc), 1, &policy)?;
        out.push(
            trace_report("trace/osc_minus", trace_osc_closed(&qs, Sign::Minus, -nu_osc)?, value, tail).with_param("draw", draw),
        );

        // identities among the closed forms, valid beyond the convergence regions
        let nu = cplx(rng, (-2.0, 2.0), (-1.0, 1.0));
        let mf = C64::new(m as f64, 0.0);
        let lhs = trace_findim_closed(&qs, m, j, nu);
        let rhs = trace_verma_closed(&qs, mf, j, nu)? - trace_verma_closed(&qs, -mf - 2.0, j, nu)?;
        let scale = lhs.norm().max(rhs.norm()).max(f64::MIN_POSITIVE);
        out.push(RelationReport::new("trace/finite_as_difference", (lhs - rhs).norm() / scale, 0.0, 1e-11).with_param("draw", draw));
        let p = trace_osc_closed(&qs, Sign::Plus, nu)?;
        let mneg = trace_osc_closed(&qs, Sign::Minus, nu)?;
        out.push(RelationReport::new("trace/osc_minus_is_minus_plus", (p + mneg).norm() / p.norm(), 0.0, 1e-11).with_param("draw", draw));
    }
    Ok(out)
}

fn rmatrix<R: Rng>(cfg: &RunConfig, rng: &mut R) -> Result<Vec<RelationReport>> {
    let qs = cfg.qs()?;
    let g = cfg.grading()?;
    let policy = policy_with_tol(cfg, 1e-10)?;
    let site = |u: C64| finite_dim_eval(&qs, 1, SpectralPoint::new(u), g);
    let mut out = Vec::new();
    for draw in 0..20 {
        let (u1, u2) = (cplx(rng, (-1.0, 1.0), (-0.5, 0.5)), cplx(rng, (-1.0, 1.0), (-0.5, 0.5)));
        let sol = solve_intertwiner(&site(u1), &site(u2), &policy)?;
        let mut comps = BTreeMap::new();
        comps.insert("inverse_gap".to_string(), 1.0 / sol.gap);
        comps.insert("nullspace_excess".to_string(), (sol.nullspace_dim as f64 - 1.0).abs());
        out.push(
            RelationReport::from_components("intertwiner_unique", comps, 0.0, 1e-6)
                .with_complex("u1", u1)
                .with_complex("u2", u2)
                .with_param("gap", sol.gap)
                .with_param("draw", draw),
        );
        let a = cplx(rng, (-1.0, 1.0), (-0.5, 0.5));
        let shifted = solve_intertwiner(&site(u1 + a), &site(u2 + a), &policy)?;
        let res = qloop::qcore::relative_residual(&[sol.r.mat.clone(), -shifted.r.mat.clone()]);
        out.push(RelationReport::new("difference_property", res, 0.0, 1e-11).with_complex("shift", a).with_param("draw", draw));
    }
    for draw in 0..20 {
        let us: Vec<C64> = (0..3).map(|_| cplx(rng, (-1.0, 1.0), (-0.5, 0.5))).collect();
        out.push(yang_baxter_check(&site(us[0]), &site(us[1]), &site(us[2]), &policy)?.with_param("draw", draw));
    }
    Ok(out)
}

/// Chain-operator families used by the operator suite.
#[derive(Clone, Copy, Debug)]
enum OpKind {
    TTilde(C64),
    TFinite(u32),
    TMu(C64),
    Q,
    QBar,
}

fn build_op(kind: OpKind, u: C64, chain: &ChainSpec, policy: &TruncationPolicy, profile: &CalibrationProfile) -> Result<DMatrix<C64>> {
    let pt = SpectralPoint::new(u);
    Ok(match kind {
        OpKind::TTilde(mu) => transfer_t_tilde(mu, pt, chain, policy, profile)?,
        OpKind::TFinite(m) => transfer_t_finite(m, pt, chain, profile)?,
        OpKind::TMu(mu) => transfer_t_mu(mu, pt, chain, policy, profile)?,
        OpKind::Q => q_operator(pt, chain, policy, profile)?,
        OpKind::QBar => q_bar_operator(pt, chain, policy, profile)?,
    }
    .matrix
    .mat)
}

fn random_kind<R: Rng>(rng: &mut R) -> OpKind {
    match rng.gen_range(0..5) {
        0 => OpKind::TTilde(cplx(rng, (-2.0, 2.0), (-0.5, 0.5))),
        1 => OpKind::TFinite(rng.gen_range(1..4)),
        2 => OpKind::TMu(cplx(rng, (-2.0, 2.0), (-0.5, 0.5))),
        3 => OpKind::Q,
        _ => OpKind::QBar,
    }
}

fn profile_for(cfg: &RunConfig) -> Result<CalibrationProfile> {
    calibrate(&cfg.chain(1)?, &cfg.grid_points(), &cfg.policy()?)
}

/// A convergent twist for comparisons with truncated numeric traces.
fn convergent_twist(qs: &QScalar) -> C64 {
    C64::new(1.6, 0.3) / qs.hbar()
}

fn operators<R: Rng>(cfg: &RunConfig, rng: &mut R) -> Result<Vec<RelationReport>> {
    let policy = cfg.policy()?;
    let profile = profile_for(cfg)?;
    let qs = cfg.qs()?;
    let mut out = Vec::new();
    for l in 1..=cfg.l.max(4) {
        let chain = cfg.chain(l).or_else(|_| ChainSpec::new(qs, l, cfg.phi(), cfg.grading()?).map_err(Error::from))?;
        let u = cplx(rng, (-0.5, 0.5), (-0.2, 0.2));
        let pt = SpectralPoint::new(u);
        let id = DMatrix::<C64>::identity(chain.dim(), chain.dim());
        let t0 = transfer_t_finite(0, pt, &chain, &profile)?;
        out.push(RelationReport::new("t0_identity", (t0.mat() - &id).norm(), 0.0, 0.0).with_param("L", l));
        let tm1 = transfer_t_mu(C64::new(-1.0, 0.0), pt, &chain, &policy, &profile)?;
        out.push(RelationReport::new("t_minus_one_zero", tm1.mat().norm(), tm1.tail(), 0.0).with_param("L", l));
        let mu = cplx(rng, (-2.0, 2.0), (-0.5, 0.5));
        let a = transfer_t_mu(mu, pt, &chain, &policy, &profile)?;
        let b = transfer_t_mu(-mu - 2.0, pt, &chain, &policy, &profile)?;
        out.push(
            RelationReport::new("t_mu_reflection", (a.mat() + b.mat()).norm() / a.mat().norm(), a.tail() + b.tail(), 0.0)
                .with_param("L", l)
                .with_complex("mu", mu),
        );
        for m in 1..=3u32 {
            let f = transfer_t_finite(m, pt, &chain, &profile)?;
            let d = transfer_t_mu(C64::new(m as f64, 0.0), pt, &chain, &policy, &profile)?;
            let res = qloop::qcore::relative_residual(&[f.mat().clone(), -d.mat().clone()]);
            out.push(RelationReport::new("t_finite_vs_difference", res, d.tail(), policy.tol).with_param("L", l).with_param("m", m));
        }
        let nu = cplx(rng, (-1.0, 1.0), (-1.0, 1.0));
        let cartan = chain.cartan(nu);
        let mut worst_cartan: f64 = 0.0;
        let mut worst_sector: f64 = 0.0;
        for pair in 0..20 {
            let (k1, k2) = (random_kind(rng), random_kind(rng));
            let (u1, u2) = (cplx(rng, (-0.6, 0.6), (-0.3, 0.3)), cplx(rng, (-0.6, 0.6), (-0.3, 0.3)));
            let x = build_op(k1, u1, &chain, &policy, &profile)?;
            let y = build_op(k2, u2, &chain, &policy, &profile)?;
            worst_cartan = worst_cartan.max(commutator_residual(&x, &cartan)).max(commutator_residual(&y, &cartan));
            worst_sector = worst_sector.max(off_sector_norm(&chain, &x)).max(off_sector_norm(&chain, &y));
            out.push(
                RelationReport::new("commutator", commutator_residual(&x, &y), 0.0, 1e-9)
                    .with_param("L", l)
                    .with_param("pair", pair)
                    .with_param("a", format!("{k1:?}"))
                    .with_param("b", format!("{k2:?}"))
                    .with_complex("u1", u1)
                    .with_complex("u2", u2),
            );
        }
        let mut comps = BTreeMap::new();
        comps.insert("cartan_commutator".to_string(), worst_cartan);
        comps.insert("off_sector".to_string(), worst_sector);
        out.push(RelationReport::from_components("weight_conservation", comps, 0.0, 1e-12).with_param("L", l));

        // shifting the auxiliary and all site parameters together changes only the
        // prefactor of Q and Q-bar
        let a_shift = cplx(rng, (-0.5, 0.5), (-0.2, 0.2));
        let moved = chain.shifted(a_shift);
        let s = chain.grading.sf();
        let mut comps = BTreeMap::new();
        for (name, kind, pre) in [
            ("t_tilde", OpKind::TTilde(mu), 0.0),
            ("t_finite", OpKind::TFinite(1), 0.0),
            ("q", OpKind::Q, 1.0),
            ("q_bar", OpKind::QBar, -1.0),
        ] {
            let x = build_op(kind, u, &chain, &policy, &profile)?;
            let y = build_op(kind, u + a_shift, &moved, &policy, &profile)?;
            let factor = chain.diagonal(|w| qs.pow(pre * a_shift * s * w / 4.0));
            comps.insert(name.to_string(), qloop::qcore::relative_residual(&[&factor * x, -y]));
        }
        out.push(RelationReport::from_components("difference_property", comps, 0.0, 1e-11).with_param("L", l));

        // closed-form traces against truncated numeric traces at a convergent twist
        if l <= 2 {
            let oracle = TruncationPolicy { tail_bound_required: true, ..policy.clone() };
            let twisted = ChainSpec { twist_phi: convergent_twist(&qs), ..chain.clone() };
            for (name, kind) in [("t_tilde", OpKind::TTilde(mu)), ("q", OpKind::Q), ("q_bar", OpKind::QBar)] {
                let closed = build_raw(kind, u, &twisted, &policy)?;
                let (num, tail) = build_raw_with_tail(kind, u, &twisted, &oracle)?;
                let diff = (&closed - &num).iter().map(|z| z.norm()).fold(0.0, f64::max);
                out.push(
                    RelationReport::new(format!("oracle/{name}"), diff, tail, rounding(C64::new(closed.norm(), 0.0)))
                        .with_param("L", l)
                        .with_complex("phi", twisted.twist_phi),
                );
            }
        }
    }
    Ok(out)
}

fn build_raw(kind: OpKind, u: C64, chain: &ChainSpec, policy: &TruncationPolicy) -> Result<DMatrix<C64>> {
    Ok(build_raw_with_tail(kind, u, chain, policy)?.0)
}

fn build_raw_with_tail(kind: OpKind, u: C64, chain: &ChainSpec, policy: &TruncationPolicy) -> Result<(DMatrix<C64>, f64)> {
    let pt = SpectralPoint::new(u);
    let op = match kind {
        OpKind::TTilde(mu) => transfer_t_tilde(mu, pt, chain, policy, &TopCorner)?,
        OpKind::Q => q_operator(pt, chain, policy, &TopCorner)?,
        OpKind::QBar => q_bar_operator(pt, chain, policy, &TopCorner)?,
        OpKind::TFinite(m) => transfer_t_finite(m, pt, chain, &TopCorner)?,
        OpKind::TMu(mu) => transfer_t_mu(mu, pt, chain, policy, &TopCorner)?,
    };
    let tail = op.tail();
    Ok((op.matrix.mat, tail))
}

fn calibration_suite(cfg: &RunConfig) -> Result<Vec<RelationReport>> {
    let policy = cfg.policy()?;
    let chain1 = cfg.chain(1)?;
    let grid = cfg.grid_points();
    let profile = calibrate(&chain1, &grid, &policy)?;
    let tight = TruncationPolicy { tol: 1e-12, ..policy.clone() };
    let mut out = Vec::new();
    for pt in &grid {
        out.push(check_wronskian(*pt, &chain1, &profile, &tight)?);
        out.push(check_factorization(C64::new(0.4, 0.3), *pt, &chain1, &profile, &tight)?);
    }

    // second differences must scale like h^2 when the step is halved
    let u0 = grid[0].u;
    let mut comps = BTreeMap::new();
    for (name, which) in [("g_q", 0), ("g_qbar", 1)] {
        let rough = |h: f64| -> Result<f64> {
            let vals = (-1..=1)
                .map(|k| {
                    let x = u0 + h * k as f64;
                    if which == 0 {
                        profile.g_q(x)
                    } else {
                        profile.g_qbar(x)
                    }
                })
                .collect::<qloop::Result<Vec<_>>>()?;
            Ok(roughness(&vals))
        };
        let (r1, r2) = (rough(0.02)?, rough(0.01)?);
        comps.insert(name.to_string(), (r1 / r2 / 4.0 - 1.0).abs());
    }
    out.push(RelationReport::from_components("profile_smoothness", comps, 0.0, 0.05));

    // a second calibration on a shifted grid must agree on the shared points
    let mut other: Vec<SpectralPoint> = grid.iter().skip(1).copied().collect();
    other.push(grid[0].shifted(C64::new(0.05, 0.0)));
    let second = calibrate(&chain1, &other, &policy)?;
    let mut worst: f64 = 0.0;
    for a in &profile.samples {
        for b in &second.samples {
            if a.u == b.u {
                for (x, y) in [(a.g_q, b.g_q), (a.g_qbar, b.g_qbar), (a.g_t0, b.g_t0)] {
                    let (x, y) = (C64::new(x[0], x[1]), C64::new(y[0], y[1]));
                    worst = worst.max((x - y).norm() / x.norm());
                }
            }
        }
    }
    out.push(RelationReport::new("recalibration", worst, 0.0, 1e-10));

    // the frozen profile on two sites
    let chain2 = cfg.chain(2).or_else(|_| ChainSpec::new(chain1.qs, 2, chain1.twist_phi, chain1.grading).map_err(Error::from))?;
    for pt in &grid {
        out.push(check_wronskian(*pt, &chain2, &profile, &policy)?);
        out.push(check_factorization(C64::new(0.4, 0.3), *pt, &chain2, &profile, &policy)?);
    }
    Ok(out)
}

/// Relation reports on a chain of `l` sites with a frozen profile.
pub fn relations<R: Rng>(cfg: &RunConfig, l: usize, profile: &CalibrationProfile, rng: &mut R) -> Result<Vec<RelationReport>> {
    let policy = cfg.policy()?;
    let chain = cfg.chain(l)?;
    let grid = cfg.grid_points();
    let mut out = Vec::new();
    for pt in &grid {
        out.push(check_tq(*pt, &chain, profile, &policy)?);
        out.push(check_tq_bar(*pt, &chain, profile, &policy)?);
        out.push(check_wronskian(*pt, &chain, profile, &policy)?);
        out.push(check_tq_eigen(*pt, &chain, profile, &policy)?);
    }
    let box_ = |rng: &mut R| cplx(rng, (-1.5, 1.5), (-0.3, 0.3));
    for draw in 0..cfg.relation_draws {
        let pt = grid[draw % grid.len()];
        let mu = box_(rng);
        out.push(check_factorization(mu, pt, &chain, profile, &policy)?.with_param("draw", draw));
        let (a, b, c) = (box_(rng), box_(rng), box_(rng));
        out.push(check_tq_general(a, b, c, pt, &chain, profile, &policy)?.with_param("draw", draw));
        let d = box_(rng);
        out.push(check_tt(a, b, c, d, pt, &chain, profile, &policy)?.with_param("draw", draw));
        let xi = ShiftWeight::from_h0(cplx(rng, (-2.0, 2.0), (-0.5, 0.5)));
        out.push(check_shift_relation(xi, pt, &chain, profile, &policy)?.with_param("draw", draw));
    }
    let pt = grid[0];
    let ev = Evaluator::new(&chain, profile, &policy);
    let gamma = box_(rng);
    out.push(
        check_tq_general(gamma - 2.0, gamma + 2.0, gamma, pt, &chain, profile, &policy)?.with_param("special", "usual_form"),
    );
    out.push(check_shift_relation(ShiftWeight::zero(), pt, &chain, profile, &policy)?.with_param("special", "zero_shift"));
    let t1 = ev.t_mu(C64::new(0.0, 0.0), pt.u)?;
    let (res, _, _) = residuals(&chain, &[t1, Term::exact(DMatrix::identity(chain.dim(), chain.dim())).neg()]);
    out.push(RelationReport::new("t_mu_zero_identity", res, 0.0, policy.tol).with_param("L", l));
    out.push(character_identity(&cfg.qs()?, box_(rng), cfg.n_max / 2, cfg.grading()?)?);
    Ok(out)
}

fn scan(cfg: &RunConfig) -> Result<RunOutput> {
    let policy = cfg.policy()?;
    let profile = profile_for(cfg)?;
    let chain = cfg.chain(cfg.l)?;
    let mut out = RunOutput::default();
    let mut reports = Vec::new();
    for (k, pt) in cfg.grid_points().iter().enumerate() {
        let ev = Evaluator::new(&chain, &profile, &policy);
        let ops = [("T1", ev.t_finite(1, pt.u)?.mat), ("Q", ev.q(pt.u)?.mat), ("Qbar", ev.q_bar(pt.u)?.mat)];
        for (name, m) in &ops {
            for (i, z) in eigenvalues(m).iter().enumerate() {
                out.scan.push(ScanRow { operator: name.to_string(), l: chain.len(), u_re: pt.u.re, u_im: pt.u.im, index: i, re: z.re, im: z.im });
            }
            if cfg.dump_operators {
                out.operators.push((format!("{name}_L{}_{k:03}", chain.len()), matrix_json(m)));
            }
        }
        reports.push(check_tq(*pt, &chain, &profile, &policy)?.with_param("grid_index", k));
        reports.push(check_wronskian(*pt, &chain, &profile, &policy)?.with_param("grid_index", k));
    }
    out.extend("scan", reports);
    Ok(out)
}
