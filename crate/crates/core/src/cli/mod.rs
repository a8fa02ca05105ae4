//! Command-line front end.

pub mod config;
pub mod figures;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::calculus::{evaluate, honest_benchmark};
use crate::error::Error;
use crate::markov::Method;
use crate::optimizer::{optimize_beta, profitability_threshold, Objective};
use crate::sim::{simulate, trace_replica, write_trace_csv, SimConfig};

use config::Options;
use figures::{FigureName, SimSettings, Sizes};
use output::{emit, Cell, Table};

/// Exit status for bad parameters or config values.
pub const EXIT_INVALID: i32 = 3;
/// Exit status when a numerical procedure fails to converge.
pub const EXIT_NUMERICAL: i32 = 4;
/// Exit status for unreadable or unwritable files.
pub const EXIT_IO: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::InvalidSpec(_) => CliError::Invalid(e.to_string()),
            Error::NonConvergence { .. } | Error::CalibrationFailed { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "selfish-rewards",
    version,
    about = "Analytic rewards, cutoff optimization and simulation of beta-cutoff selfish mining"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibrium and reward breakdown for one (alpha, gamma, beta)
    Analytic(Options),
    /// Best cutoff beta for an objective
    Optimize(Options),
    /// Smallest profitable hashrate for an objective
    Threshold(Options),
    /// Monte Carlo estimate next to the analytic values
    Simulate {
        #[command(flatten)]
        opts: Options,
        /// Write a per-event CSV trace of replica 0 here
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Regenerate the data behind a figure
    Figure {
        #[arg(value_enum)]
        name: FigureName,
        #[command(flatten)]
        opts: Options,
    },
}

/// Parses `argv` and runs the command, returning the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Analytic(o) => analytic(o.resolve()?),
        Command::Optimize(o) => optimize(o.resolve()?),
        Command::Threshold(o) => threshold(o.resolve()?),
        Command::Simulate { opts, trace } => simulate_cmd(opts.resolve()?, trace),
        Command::Figure { name, opts } => figure(name, opts.resolve()?),
    }
}

fn breakdown_cells(b: &crate::RewardBreakdown) -> [Cell; 4] {
    [b.block.into(), b.linear.into(), b.bernoulli.into(), b.total.into()]
}

fn analytic(o: Options) -> Result<(), CliError> {
    let spec = o.reward_spec()?;
    let params = o.params()?;
    let e = evaluate(&spec, &params, Method::ClosedForm)?;
    let st = e.equilibrium.stationary;
    let mut t = Table::new(&[
        "alpha",
        "gamma",
        "beta",
        "lambda",
        "h",
        "p0",
        "p0_prime",
        "p0_dprime",
        "p1",
        "block",
        "linear",
        "bernoulli",
        "total",
        "honest_total",
    ]);
    let mut row: Vec<Cell> = vec![
        params.alpha.into(),
        params.gamma.into(),
        params.beta.into(),
        e.equilibrium.lambda.into(),
        e.equilibrium.h.into(),
        st.p0.into(),
        st.p0_prime.into(),
        st.p0_dprime.into(),
        st.p1.into(),
    ];
    row.extend(breakdown_cells(&e.per_time));
    row.push(honest_benchmark(&spec, params.alpha).total.into());
    t.push(row);
    emit(
        &t,
        &o,
        "analytic",
        json!({ "iterations": e.equilibrium.iterations }),
        o.out.as_deref(),
    )
}

fn optimize(o: Options) -> Result<(), CliError> {
    let spec = o.reward_spec()?;
    let objective = o.objective(Objective::TOTAL)?;
    let r = optimize_beta(&spec, o.alpha()?, o.gamma(), objective)?;
    let mut t = Table::new(&[
        "alpha",
        "gamma",
        "objective",
        "beta_star",
        "objective_value",
        "honest_value",
        "lambda",
        "block",
        "linear",
        "bernoulli",
        "total",
    ]);
    let mut row: Vec<Cell> = vec![
        r.alpha.into(),
        r.gamma.into(),
        objective.to_string().into(),
        r.beta_star.into(),
        r.objective_value.into(),
        r.honest_value.into(),
        r.lambda.into(),
    ];
    row.extend(breakdown_cells(&r.full_breakdown));
    t.push(row);
    emit(&t, &o, "optimize", json!({}), o.out.as_deref())
}

fn threshold(o: Options) -> Result<(), CliError> {
    let spec = o.reward_spec()?;
    let objective = o.objective(Objective::TOTAL)?;
    let gamma = o.gamma();
    let th = profitability_threshold(&spec, gamma, objective)?;
    let mut t = Table::new(&["gamma", "objective", "threshold"]);
    t.push(vec![gamma.into(), objective.to_string().into(), th.into()]);
    emit(&t, &o, "threshold", json!({ "found": th.is_some() }), o.out.as_deref())
}

fn simulate_cmd(o: Options, trace: Option<PathBuf>) -> Result<(), CliError> {
    let spec = o.reward_spec()?;
    let params = o.params()?;
    let mut cfg = SimConfig::new(spec.clone(), params);
    cfg.lambda_mode = o.lambda_mode()?;
    cfg.horizon_events = o.events();
    cfg.replicas = o.replicas();
    cfg.seed = o.seed();
    let an = evaluate(&spec, &params, Method::ClosedForm)?;
    let sim = simulate(&cfg)?;
    if let Some(path) = &trace {
        let (_, records) = trace_replica(&cfg)?;
        let file =
            std::fs::File::create(path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        write_trace_csv(&records, std::io::BufWriter::new(file)).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let mut t = Table::new(&["quantity", "analytic", "simulated", "se"]);
    let rows = [
        (
            "attacker_block",
            Some(an.per_time.block),
            sim.attacker.block,
            sim.attacker_se.block,
        ),
        (
            "attacker_linear",
            Some(an.per_time.linear),
            sim.attacker.linear,
            sim.attacker_se.linear,
        ),
        (
            "attacker_bernoulli",
            Some(an.per_time.bernoulli),
            sim.attacker.bernoulli,
            sim.attacker_se.bernoulli,
        ),
        (
            "attacker_total",
            Some(an.per_time.total),
            sim.attacker.total,
            sim.attacker_se.total,
        ),
        (
            "attacker_state0_total",
            Some(an.per_state.f0.total().total * an.equilibrium.stationary.p0 / an.equilibrium.tau()),
            sim.attacker_state0.total,
            sim.attacker_state0_se.total,
        ),
        ("honest_total", None, sim.honest.total, sim.honest_se.total),
        (
            "orphan_rate",
            Some(an.equilibrium.lambda),
            sim.empirical_orphan_rate.value,
            sim.empirical_orphan_rate.se,
        ),
        (
            "canonical_growth",
            Some(1.0),
            sim.canonical_growth_rate.value,
            sim.canonical_growth_rate.se,
        ),
    ];
    for (name, a, s, se) in rows {
        t.push(vec![name.into(), a.into(), s.into(), se.into()]);
    }
    let details = json!({
        "lambda_used": sim.lambda_used,
        "calibration": sim.calibration,
        "events": sim.events,
        "elapsed_sim_time": sim.elapsed_sim_time,
        "trace": trace.as_ref().map(|p| p.display().to_string()),
    });
    emit(&t, &o, "simulate", details, o.out.as_deref())
}

fn figure(name: FigureName, o: Options) -> Result<(), CliError> {
    let sizes = Sizes {
        c: o.block_reward.unwrap_or(1.0),
        a: o.linear_rate.unwrap_or(1.0),
        p: o.bernoulli_p.unwrap_or(0.25),
        e: o.bernoulli_e.unwrap_or(4.0),
    };
    let settings = SimSettings {
        events: o.events(),
        replicas: o.replicas(),
        seed: o.seed(),
        lambda_mode: o.lambda_mode()?,
    };
    let (table, grid) = figures::build(name, sizes, o.gamma(), settings)?;
    let ext = o.format()?.extension();
    let out = o
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.{ext}", name.as_str())));
    let details = json!({
        "figure": name.as_str(),
        "grid": grid,
        "sizes": { "constant": sizes.c, "linear": sizes.a, "bernoulli_p": sizes.p, "bernoulli_e": sizes.e },
    });
    emit(&table, &o, &format!("figure {}", name.as_str()), details, Some(&out))
}
