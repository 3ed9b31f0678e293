//! `hiercontact`: experiments on hierarchical contact processes.
//!
//! Exit status: 0 when every check passes, 1 when a check fails or a
//! computation errors, 2 on bad flags or config.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use hiercontact::bounds::McOptions;
use hiercontact::exactgen::StarConvention;
use hiercontact::lattice::RateModel;

use commands::{
    checked_model, parse_family, usage, BoundsParams, BracketParams, Check, CompareParams, CoupleParams, CoupleTest,
    ExperimentConfig, SimulateParams, Task, UsageError, VerifyParams,
};
use output::Sink;

#[derive(Parser)]
#[command(name = "hiercontact", version, about = "Contact processes on the hierarchical group")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Write JSON lines here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo survival from a single infected site.
    Simulate(SimulateArgs),
    /// Exact generator identities over a parameter grid.
    Verify(VerifyArgs),
    /// Statistical checks of the coupled process.
    Couple(CoupleArgs),
    /// Survival product, extinction certificate and condition diagnostics.
    Bounds(BoundsArgs),
    /// Bracket the critical recovery rate for one or more families.
    Bracket(BracketArgs),
    /// Reduce a base-N model to base 2.
    Compare(CompareArgs),
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long = "N", default_value_t = 2)]
    base: u32,
    #[arg(long)]
    delta: f64,
    /// Rate family: geometric:q, double_exp:θ, effective_dim:d or explicit:a1,a2,...
    #[arg(long, alias = "family", default_value = "geometric:0.5")]
    alpha: String,
}

impl ModelArgs {
    fn resolve(&self) -> Result<RateModel> {
        checked_model(RateModel { base: self.base, delta: self.delta, alpha: parse_family(&self.alpha)? })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    replicas: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Only write the summary line.
    #[arg(long)]
    summary_only: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Check::All)]
    check: Check,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    xi_override: Option<f64>,
    /// Values of the irrelevant table entries: a or b.
    #[arg(long, default_value = "a", value_parser = parse_star)]
    star: StarConvention,
}

fn parse_star(s: &str) -> Result<StarConvention, String> {
    match s {
        "a" | "A" => Ok(StarConvention::A),
        "b" | "B" => Ok(StarConvention::B),
        _ => Err(format!("expected a or b, got {s:?}")),
    }
}

#[derive(Args)]
struct CoupleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: u32,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    replicas: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = CoupleTest::Conditional)]
    test: CoupleTest,
    #[arg(long, default_value_t = 0.02)]
    tv_threshold: f64,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 400)]
    levels: usize,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long, default_value_t = 60)]
    depth: usize,
    #[arg(long = "Nprime")]
    n_prime: Option<f64>,
    #[arg(long, default_value_t = 20)]
    trace_levels: usize,
}

#[derive(Args)]
struct BracketArgs {
    #[arg(long = "N", default_value_t = 2)]
    base: u32,
    /// Repeat for several families.
    #[arg(long = "family", required = true)]
    families: Vec<String>,
    #[arg(long = "Nprime")]
    n_prime: Option<f64>,
    #[arg(long)]
    bisect_iters: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Add a finite-system Monte Carlo estimate with this many replicas per probe.
    #[arg(long)]
    mc_replicas: Option<u64>,
    #[arg(long, default_value_t = 4)]
    mc_n: usize,
    #[arg(long, default_value_t = 10.0)]
    mc_t: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the bracket table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long = "N")]
    base: u32,
    #[arg(long = "Nprime")]
    n_prime: f64,
    #[arg(long, default_value = "geometric:0.5")]
    alpha: String,
}

fn task_of(cmd: Cmd) -> Result<(Task, Option<PathBuf>)> {
    let task = match cmd {
        Cmd::Simulate(a) => Task::Simulate(SimulateParams {
            model: a.model.resolve()?,
            n: a.n,
            t: a.t,
            replicas: a.replicas,
            seed: a.seed,
            per_replica: !a.summary_only,
        }),
        Cmd::Verify(a) => Task::Verify(VerifyParams {
            check: a.check,
            n: a.n,
            delta: a.delta,
            alpha: a.alpha.as_deref().map(parse_family).transpose()?,
            xi: a.xi,
            xi_override: a.xi_override,
            star: a.star,
        }),
        Cmd::Couple(a) => Task::Couple(CoupleParams {
            model: a.model.resolve()?,
            n: a.n,
            t: a.t,
            replicas: a.replicas,
            seed: a.seed,
            test: a.test,
            tv_threshold: a.tv_threshold,
        }),
        Cmd::Bounds(a) => Task::Bounds(BoundsParams {
            model: a.model.resolve()?,
            levels: a.levels,
            tolerance: a.tolerance,
            depth: a.depth,
            n_prime: a.n_prime,
            trace_levels: a.trace_levels,
        }),
        Cmd::Bracket(a) => Task::Bracket(BracketParams {
            base: a.base,
            families: a.families.iter().map(|s| parse_family(s)).collect::<Result<_>>()?,
            n_prime: a.n_prime,
            bisect_iters: a.bisect_iters,
            rel_tol: a.rel_tol,
            mc: a.mc_replicas.map(|replicas| McOptions { n: a.mc_n, t: a.mc_t, replicas, seed: a.seed, level: 0.5 }),
            csv: a.csv,
        }),
        Cmd::Compare(a) => Task::Compare(CompareParams { base: a.base, n_prime: a.n_prime, alpha: parse_family(&a.alpha)? }),
        Cmd::Run { config } => {
            let text =
                std::fs::read_to_string(&config).with_context(|| format!("cannot read {}", config.display()))?;
            let cfg: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", config.display())))?;
            return Ok((cfg.task, cfg.out));
        }
    };
    Ok((task, None))
}

fn run(cli: Cli) -> Result<bool> {
    let (task, config_out) = task_of(cli.command)?;
    let out = cli.out.or(config_out);
    let mut sink = Sink::open(out.as_deref())?;
    let pass = task.run(&mut sink)?;
    sink.finish()?;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
