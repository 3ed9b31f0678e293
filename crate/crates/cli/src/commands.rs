//! Experiment parameters and the runners behind each subcommand.
//!
//! Every runner writes its records to the sink, then one summary record, and
//! returns whether its scientific checks passed.

use std::fmt;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use hiercontact::bounds::{
    bracket_delta_c, certify_extinction, compare_reduce, finite_survival_bound, recursion, sandwich_holds,
    survival_product, Bracket, BracketOptions, McOptions, SurvivalVerdict,
};
use hiercontact::coupling::{cascade_stats, conditional_law_test, marginal_test};
use hiercontact::exactgen::{
    verify_commute_with, verify_intertwine_with, verify_one_level_spectrum, verify_star_independence,
    verify_two_level_tables, StarConvention, VerificationReport, VerifyOptions,
};
use hiercontact::lattice::{condition_diagnostics, AlphaSeq, RateModel};
use hiercontact::simulate::{run_batch, SparseConfig};
use hiercontact::stats::proportion;

use crate::output::Sink;

/// Bad flags or config; maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Validates the model and binds `effective_dim` rates to its base.
pub fn checked_model(model: RateModel) -> Result<RateModel> {
    RateModel::new(model.base, model.delta, model.alpha).map_err(|e| usage(e.to_string()))
}

pub fn parse_family(s: &str) -> Result<AlphaSeq> {
    s.parse::<AlphaSeq>().map_err(|e| usage(format!("--alpha {s:?}: {e}")))
}

fn rebind(alpha: &AlphaSeq, base: u32) -> Result<AlphaSeq> {
    Ok(checked_model(RateModel { base, delta: 1.0, alpha: alpha.clone() })?.alpha)
}

fn default_seed() -> u64 {
    0
}

fn default_true() -> bool {
    true
}

/// A full experiment, as read by `run --config`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Task {
    Simulate(SimulateParams),
    Verify(VerifyParams),
    Couple(CoupleParams),
    Bounds(BoundsParams),
    Bracket(BracketParams),
    Compare(CompareParams),
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub task: Task,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Task {
    pub fn run(self, sink: &mut Sink) -> Result<bool> {
        match self {
            Task::Simulate(p) => simulate(p, sink),
            Task::Verify(p) => verify(p, sink),
            Task::Couple(p) => couple(p, sink),
            Task::Bounds(p) => bounds(p, sink),
            Task::Bracket(p) => bracket(p, sink),
            Task::Compare(p) => compare(p, sink),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct SimulateParams {
    pub model: RateModel,
    pub n: usize,
    pub t: f64,
    pub replicas: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Write one line per replica before the summary.
    #[serde(default = "default_true")]
    pub per_replica: bool,
}

fn simulate(p: SimulateParams, sink: &mut Sink) -> Result<bool> {
    if p.replicas == 0 {
        return Err(usage("--replicas must be at least 1"));
    }
    if !(p.t >= 0.0 && p.t.is_finite()) {
        return Err(usage(format!("--t must be finite and >= 0, got {}", p.t)));
    }
    let model = checked_model(p.model)?;
    let init = SparseConfig::single(model.base, p.n, 0).map_err(|e| usage(e.to_string()))?;
    let results = run_batch(&model, p.n, &init, p.t, p.replicas, p.seed)?;
    if p.per_replica {
        for r in &results {
            sink.record("replica", r)?;
        }
    }
    let survived = results.iter().filter(|r| r.survived_to_t).count() as u64;
    let (p_hat, stderr) = proportion(survived, p.replicas);
    // The recursion bound is only available for the binary lattice.
    let bound = (model.base == 2)
        .then(|| finite_survival_bound(model.delta, &model.alpha, p.n, p.t))
        .transpose()?;
    let pass = bound.is_none_or(|b| p_hat >= b - 3.0 * stderr);
    sink.record(
        "summary",
        &json!({
            "command": "simulate", "model": model, "n": p.n, "t": p.t, "replicas": p.replicas, "seed": p.seed,
            "survived": survived, "p_hat": p_hat, "stderr": stderr, "finite_survival_bound": bound, "pass": pass,
        }),
    )?;
    Ok(pass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    #[default]
    All,
    Intertwine,
    Commute,
    Spectrum,
    TwoLevel,
    Star,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct VerifyParams {
    #[serde(default)]
    pub check: Check,
    /// Restricts intertwine/commute/star to this level.
    #[serde(default)]
    pub n: Option<u32>,
    /// A single parameter point instead of the default grid.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub alpha: Option<AlphaSeq>,
    /// `ξ` for the two-level tables.
    #[serde(default)]
    pub xi: Option<f64>,
    /// Kernel parameter forced into intertwine/commute in place of `f(α₁/δ)`.
    #[serde(default)]
    pub xi_override: Option<f64>,
    #[serde(default)]
    pub star: StarConvention,
}

const GRID_DELTAS: [f64; 3] = [0.2, 1.0, 4.0];
const GRID_ALPHAS: [[f64; 3]; 3] = [[2.0, 1.0, 0.5], [0.3, 0.3, 0.3], [5.0, 0.1, 2.0]];
const GRID_XI: [f64; 3] = [0.05, 0.25, 0.5];

fn verify(p: VerifyParams, sink: &mut Sink) -> Result<bool> {
    let points: Vec<(f64, Vec<f64>)> = match (p.delta, &p.alpha) {
        (None, None) => GRID_DELTAS
            .iter()
            .flat_map(|&d| GRID_ALPHAS.iter().map(move |a| (d, a.to_vec())))
            .collect(),
        (delta, alpha) => {
            let alpha = alpha.clone().unwrap_or(AlphaSeq::Geometric { q: 0.5 });
            alpha.validate().map_err(|e| usage(e.to_string()))?;
            vec![(delta.unwrap_or(1.0), alpha.prefix(3))]
        }
    };
    let levels = |max: u32| -> Result<Vec<u32>> {
        match p.n {
            Some(n) if (1..=max).contains(&n) => Ok(vec![n]),
            Some(n) => Err(usage(format!("--n {n} is outside 1..={max} for this check"))),
            None => Ok((1..=max).collect()),
        }
    };
    let wants = |c: Check| p.check == Check::All || p.check == c;
    let opts = VerifyOptions { star: p.star, xi_override: p.xi_override };
    let mut reports: Vec<VerificationReport> = Vec::new();

    if wants(Check::Intertwine) {
        for n in levels(3)? {
            for (d, a) in &points {
                reports.push(verify_intertwine_with(n, *d, a, &opts)?);
            }
        }
    }
    if wants(Check::Commute) {
        let commute_levels = match p.n {
            Some(n) if p.check == Check::All => (n <= 2).then_some(n).into_iter().collect(),
            _ => levels(2)?,
        };
        for n in commute_levels {
            for (d, a) in &points {
                reports.push(verify_commute_with(n, *d, a, &opts)?);
            }
        }
    }
    if wants(Check::Spectrum) {
        let pairs: Vec<(f64, f64)> = match (p.delta, &p.alpha) {
            (None, None) => (0..5)
                .flat_map(|i| (0..5).map(move |j| (0.1 * 4f64.powi(i), 0.05 * 5f64.powi(j))))
                .collect(),
            _ => points.iter().map(|(d, a)| (*d, a[0])).collect(),
        };
        for (d, a1) in pairs {
            reports.push(verify_one_level_spectrum(d, a1)?);
        }
    }
    if wants(Check::TwoLevel) {
        for xi in p.xi.map_or(GRID_XI.to_vec(), |x| vec![x]) {
            reports.push(verify_two_level_tables(xi).map_err(|e| usage(e.to_string()))?);
        }
    }
    if wants(Check::Star) {
        for n in levels(3)? {
            for (d, a) in &points {
                reports.push(verify_star_independence(n, *d, a)?);
            }
        }
    }

    let mut failed = Vec::new();
    for r in &reports {
        sink.record("verification", r)?;
        if !r.pass {
            let name = format!("{} (n = {}, residual {:.3e} > {:.0e})", r.check, r.n, r.max_residual, r.threshold);
            eprintln!("check failed: {name}");
            failed.push(name);
        }
    }
    let pass = failed.is_empty();
    sink.record(
        "summary",
        &json!({
            "command": "verify", "check": p.check, "xi_override": p.xi_override, "star": p.star,
            "checks_run": reports.len(), "failed": failed, "pass": pass,
        }),
    )?;
    Ok(pass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CoupleTest {
    #[default]
    Conditional,
    Marginal,
    Cascade,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CoupleParams {
    pub model: RateModel,
    pub n: u32,
    pub t: f64,
    pub replicas: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub test: CoupleTest,
    #[serde(default = "default_tv")]
    pub tv_threshold: f64,
}

fn default_tv() -> f64 {
    0.02
}

fn couple(p: CoupleParams, sink: &mut Sink) -> Result<bool> {
    if p.replicas == 0 {
        return Err(usage("--replicas must be at least 1"));
    }
    let model = checked_model(p.model)?;
    let pass = match p.test {
        CoupleTest::Conditional => {
            let r = conditional_law_test(&model, p.n, p.t, p.replicas, p.seed)?;
            sink.record("coupling", &r)?;
            r.pass
        }
        CoupleTest::Marginal => {
            let r = marginal_test(&model, p.n, p.t, p.replicas, p.seed, p.tv_threshold)?;
            sink.record("coupling", &r)?;
            r.pass
        }
        CoupleTest::Cascade => {
            let r = cascade_stats(&model, p.n, p.t, p.replicas, p.seed)?;
            sink.record("cascade", &r)?;
            r.pass
        }
    };
    sink.record(
        "summary",
        &json!({
            "command": "couple", "test": p.test, "model": model, "n": p.n, "t": p.t,
            "replicas": p.replicas, "seed": p.seed, "pass": pass,
        }),
    )?;
    Ok(pass)
}

#[derive(Debug, Clone, Deserialize)]
pub struct BoundsParams {
    pub model: RateModel,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Exponent used to reduce a base-`N` model to base 2.
    #[serde(default)]
    pub n_prime: Option<f64>,
    /// Levels of the recursion trace to write out.
    #[serde(default = "default_trace")]
    pub trace_levels: usize,
}

fn default_levels() -> usize {
    400
}

fn default_tolerance() -> f64 {
    1e-8
}

fn default_depth() -> usize {
    60
}

fn default_trace() -> usize {
    20
}

fn default_n_prime(base: u32) -> f64 {
    if base.is_power_of_two() {
        base as f64
    } else {
        base as f64 - 0.5
    }
}

fn bounds(p: BoundsParams, sink: &mut Sink) -> Result<bool> {
    let model = checked_model(p.model)?;
    sink.record("conditions", &condition_diagnostics(&model.alpha, model.base, p.depth.max(2))?)?;
    let binary = if model.base == 2 {
        model.alpha.clone()
    } else {
        let r = compare_reduce(&model.alpha, model.base, p.n_prime.unwrap_or(default_n_prime(model.base)))?;
        sink.record("reduction", &r)?;
        r.alpha_doubleprime
    };
    sink.record("trace", &recursion(model.delta, &binary, p.trace_levels)?)?;
    let sp = survival_product(model.delta, &binary, p.tolerance, p.levels)?;
    sink.record("survival_product", &sp)?;
    let cert = certify_extinction(model.delta, &model.alpha, model.base, p.depth)?;
    sink.record("extinction", &json!({ "certificate": cert }))?;
    // A certified survival bound and an extinction certificate cannot both hold.
    let pass = !(sp.verdict == SurvivalVerdict::Positive && cert.is_some());
    sink.record(
        "summary",
        &json!({
            "command": "bounds", "model": model, "verdict": sp.verdict, "pi_lower": sp.pi_lower,
            "extinction_certified": cert.is_some(), "n_witness": cert.as_ref().map(|c| c.n_witness), "pass": pass,
        }),
    )?;
    Ok(pass)
}

#[derive(Debug, Clone, Deserialize)]
pub struct BracketParams {
    #[serde(rename = "N", default = "default_base")]
    pub base: u32,
    pub families: Vec<AlphaSeq>,
    #[serde(default)]
    pub n_prime: Option<f64>,
    #[serde(default)]
    pub bisect_iters: Option<usize>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub mc: Option<McOptions>,
    /// Also write the bracket table as CSV here.
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

fn default_base() -> u32 {
    2
}

fn bracket(p: BracketParams, sink: &mut Sink) -> Result<bool> {
    if p.families.is_empty() {
        return Err(usage("bracket needs at least one --family"));
    }
    let mut opts = BracketOptions { n_prime: p.n_prime, mc: p.mc.clone(), ..BracketOptions::default() };
    if let Some(it) = p.bisect_iters {
        opts.bisect_iters = it;
    }
    if let Some(tol) = p.rel_tol {
        opts.rel_tol = tol;
    }
    let mut rows: Vec<Bracket> = Vec::new();
    for fam in &p.families {
        let b = bracket_delta_c(&rebind(fam, p.base)?, p.base, &opts)?;
        sink.record("bracket", &b)?;
        rows.push(b);
    }
    eprintln!("{:<28} {:>14} {:>14}", "family", "lower", "upper");
    for b in &rows {
        eprintln!("{:<28} {:>14.6e} {:>14.6e}", b.family, b.lower, b.upper);
    }
    if let Some(path) = &p.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(Bracket::csv_header().split(','))?;
        for b in &rows {
            let mc = b.mc_estimate.map_or(String::new(), |v| v.to_string());
            w.write_record([
                b.family.clone(),
                b.lower.to_string(),
                b.upper.to_string(),
                mc,
                b.survival_levels.to_string(),
                b.certify_depth.to_string(),
            ])?;
        }
        w.flush()?;
    }
    let pass = rows.iter().all(|b| b.consistent);
    sink.record(
        "summary",
        &json!({
            "command": "bracket", "N": p.base, "families": rows.len(),
            "brackets": rows.iter().map(|b| json!({"family": b.family, "lower": b.lower, "upper": b.upper})).collect::<Vec<_>>(),
            "pass": pass,
        }),
    )?;
    Ok(pass)
}

#[derive(Debug, Clone, Deserialize)]
pub struct CompareParams {
    #[serde(rename = "N")]
    pub base: u32,
    #[serde(rename = "N_prime")]
    pub n_prime: f64,
    #[serde(default = "default_compare_alpha")]
    pub alpha: AlphaSeq,
}

fn default_compare_alpha() -> AlphaSeq {
    AlphaSeq::Geometric { q: 0.5 }
}

fn compare(p: CompareParams, sink: &mut Sink) -> Result<bool> {
    let alpha = rebind(&p.alpha, p.base)?;
    let r = compare_reduce(&alpha, p.base, p.n_prime)?;
    sink.record("reduction", &r)?;
    let pass = sandwich_holds(p.n_prime, p.base, r.m, r.n);
    sink.record(
        "summary",
        &json!({
            "command": "compare", "N": p.base, "N_prime": p.n_prime, "m": r.m, "n": r.n,
            "sandwich_holds": pass, "pass": pass,
        }),
    )?;
    Ok(pass)
}
