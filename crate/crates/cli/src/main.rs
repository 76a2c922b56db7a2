//! Command-line front end: run a scenario to a trace file, check a trace
//! against a scenario's properties, or fuzz a scenario template over a seed
//! range. Exit codes: 0 all checks passed, 1 at least one violation, 2 for
//! usage, schema, or I/O errors.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use viewsim::checkers::{self, any_violation, Verdict};
use viewsim::scenario::{builtin_names, CheckName, Scenario};
use viewsim::trace::Trace;
use viewsim::{fuzz, sim};

#[derive(Parser)]
#[command(
    name = "viewsim",
    about = "Deterministic simulator and trace checkers for view-synchronized \
             consensus and replicated registers",
    after_help = bundled_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the trace to a file.
    Run(RunArgs),
    /// Run property checkers over a previously recorded trace.
    Check(CheckArgs),
    /// Derive and simulate many seeds of a scenario template, checking each.
    Fuzz(FuzzArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Bundled scenario name or path to a scenario file.
    #[arg(long)]
    scenario: String,
    /// Seed override; defaults to the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Horizon override, in ticks.
    #[arg(long)]
    horizon: Option<u64>,
    /// Trace output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Trace file produced by `run`.
    trace: PathBuf,
    /// Scenario the trace was recorded under; supplies the parameters the
    /// checkers need (topology, failure pattern, timing).
    #[arg(long)]
    scenario: String,
    /// Comma-separated checks to run instead of the scenario's enabled list.
    #[arg(long, value_delimiter = ',')]
    checks: Vec<CheckName>,
}

#[derive(Args)]
struct FuzzArgs {
    /// Bundled template name or path to a template file.
    #[arg(long)]
    scenario: String,
    /// Number of seeds to sweep.
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// First seed of the range.
    #[arg(long, default_value_t = 0)]
    start_seed: u64,
    /// Write the first failing derived scenario here, for replay with `run`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn bundled_help() -> String {
    format!("Bundled scenarios: {}", builtin_names().join(", "))
}

fn main() {
    match dispatch() {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

/// Ok(true) = clean, Ok(false) = violations found, Err = operational error.
fn dispatch() -> anyhow::Result<bool> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Check(args) => cmd_check(args),
        Command::Fuzz(args) => cmd_fuzz(args),
    }
}

fn load_scenario(name_or_path: &str) -> anyhow::Result<Scenario> {
    Scenario::load_named(name_or_path)
        .with_context(|| format!("loading scenario {name_or_path:?}"))
}

fn cmd_run(args: RunArgs) -> anyhow::Result<bool> {
    let mut sc = load_scenario(&args.scenario)?;
    if let Some(h) = args.horizon {
        sc.run.horizon = h;
        sc.validate().context("horizon override")?;
    }
    let seed = args.seed.unwrap_or(sc.run.seed);
    let res = sim::run(&sc, seed).context("simulation")?;
    res.trace
        .write_to(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} records (end t={}) to {}",
        res.trace.records.len(),
        res.trace.end_time(),
        args.out.display()
    );
    Ok(true)
}

fn cmd_check(args: CheckArgs) -> anyhow::Result<bool> {
    let sc = load_scenario(&args.scenario)?;
    let trace = Trace::read_from(&args.trace)
        .with_context(|| format!("reading {}", args.trace.display()))?;
    if trace.header.n != sc.n {
        bail!(
            "trace has n={} but scenario {:?} has n={}",
            trace.header.n,
            sc.name,
            sc.n
        );
    }
    if trace.header.scenario != sc.name {
        eprintln!(
            "note: trace was recorded under scenario {:?}",
            trace.header.scenario
        );
    }
    let verdicts: Vec<Verdict> = if args.checks.is_empty() {
        checkers::run_enabled(&sc, &trace)?
    } else {
        args.checks
            .iter()
            .map(|&c| checkers::run_check(&sc, &trace, c))
            .collect::<viewsim::Result<_>>()?
    };
    if verdicts.is_empty() {
        bail!("no checks requested and the scenario enables none");
    }
    for v in &verdicts {
        println!("{v}");
    }
    Ok(!any_violation(&verdicts))
}

fn cmd_fuzz(args: FuzzArgs) -> anyhow::Result<bool> {
    let template = load_scenario(&args.scenario)?;
    let report = fuzz::sweep(&template, args.start_seed, args.seeds).context("sweep")?;
    print!("{report}");
    if let (Some(path), Some(first)) = (&args.out, report.failures.first()) {
        std::fs::write(path, &first.scenario_toml)
            .with_context(|| format!("writing {}", path.display()))?;
        println!(
            "first failing scenario (seed {}) written to {}",
            first.seed,
            path.display()
        );
    }
    Ok(report.ok())
}
