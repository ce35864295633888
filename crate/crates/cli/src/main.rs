//! homocount: experiment driver for counting lattice points on affine
//! homogeneous varieties, checking congruence lifting, sieve axioms and
//! almost-prime statistics against calibrated acceptance bands.

mod config;
mod experiments;
mod report;
mod shard;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::{config_hash, Experiment};
use homocount_core::Budget;

#[derive(Parser)]
#[command(
    name = "homocount",
    version,
    about = "Counting and sieving on affine homogeneous varieties",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Report directory; defaults to the config's `out`, then ".".
    #[arg(long)]
    out: Option<PathBuf>,
    /// Split the enumeration into this many shards and run one of them.
    #[arg(long)]
    shards: Option<u64>,
    /// Which shard to run, 0-based.
    #[arg(long, requires = "shards")]
    shard: Option<u64>,
    /// Candidate budget override.
    #[arg(long)]
    budget: Option<u64>,
    /// Seed override, recorded in the report header.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct MergeArgs {
    /// Directory receiving the merged enumeration cache entry.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Part files produced by --shards/--shard runs.
    #[arg(required = true)]
    parts: Vec<PathBuf>,
}

#[derive(clap::Args)]
struct DiffArgs {
    /// Baseline report (JSON)
    a: PathBuf,
    /// Report to compare against the baseline
    b: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimal-lift profile over a range of moduli.
    Lift(RunArgs),
    /// Fiber balance of ball points over residue classes.
    LiftQuant(RunArgs),
    /// Growth on a proper subvariety against the ambient group.
    Restrict(RunArgs),
    /// Fraction of ball matrices with distinct eigenvalues.
    Generic(RunArgs),
    /// Sieve axioms, almost-prime counts and density bands.
    Sift(RunArgs),
    /// Smallest solutions of f(x) = b mod q across residue classes.
    Linnik(RunArgs),
    /// Hit counts for one congruence class against a reference density.
    LinnikDensity(RunArgs),
    /// Table of the spectral exponent formulas for a parameter preset.
    Exponents(RunArgs),
    /// Pell negative control: logarithmic growth, drifting exponents.
    PellControl(RunArgs),
    /// Ball counts over a height grid and the fitted growth exponent.
    Growth(RunArgs),
    /// Merge shard part files into a cached enumeration.
    Merge(MergeArgs),
    /// Compare two reports of the same experiment.
    Diff(DiffArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Lift(a) => run(Experiment::Lift, a),
        Cmd::LiftQuant(a) => run(Experiment::LiftQuant, a),
        Cmd::Restrict(a) => run(Experiment::Restrict, a),
        Cmd::Generic(a) => run(Experiment::Generic, a),
        Cmd::Sift(a) => run(Experiment::Sift, a),
        Cmd::Linnik(a) => run(Experiment::Linnik, a),
        Cmd::LinnikDensity(a) => run(Experiment::LinnikDensity, a),
        Cmd::Exponents(a) => run(Experiment::Exponents, a),
        Cmd::PellControl(a) => run(Experiment::PellControl, a),
        Cmd::Growth(a) => run(Experiment::Growth, a),
        Cmd::Merge(a) => merge(a),
        Cmd::Diff(a) => return diff(a),
    };
    match outcome {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Runs one experiment; returns whether every verdict passed.
fn run(experiment: Experiment, args: RunArgs) -> Result<bool> {
    let mut cfg = config::load(&args.config)?;
    match &cfg.experiment {
        Some(name) if name != experiment.name() => bail!(
            "config names experiment {name:?} but the {} subcommand was invoked",
            experiment.name()
        ),
        _ => cfg.experiment = Some(experiment.name().to_string()),
    }
    if let Some(b) = args.budget {
        cfg.budget = Some(b);
    }
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    let out_dir = args
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let budget_candidates = *cfg.budget.get_or_insert(1_000_000_000);
    let budget = Budget::new(budget_candidates);
    let seed = *cfg.seed.get_or_insert(0);

    if let Some(shards) = args.shards {
        let index = args.shard.context("--shards needs --shard to pick which part to run")?;
        let path = shard::run_shard(experiment, &mut cfg, shards, index, &budget, &out_dir)?;
        println!("shard {index} of {shards}: {}", path.display());
        return Ok(true);
    }

    let outcome = experiments::run(experiment, &mut cfg, &budget)?;
    let hash = config_hash(&cfg);
    let mut echoed = cfg.clone();
    echoed.out = None;
    let header = report::Header {
        experiment: experiment.name().to_string(),
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash,
        config: echoed,
        budget: budget_candidates,
        seed,
        cache_dir: homocount_core::enumerate::default_cache_dir().display().to_string(),
    };
    let all_passed = outcome.verdicts.iter().all(|v| v.pass);
    let verdicts = outcome.verdicts.clone();
    let full = report::Report::assemble(header, outcome);
    let (json_path, csv_path) = report::write_report(&full, &out_dir)?;

    for v in &verdicts {
        let measured = v.measured.map(|m| format!(" measured={m}")).unwrap_or_default();
        println!("{} {}{} ({})", if v.pass { "PASS" } else { "FAIL" }, v.name, measured, v.detail);
    }
    println!("report: {}", json_path.display());
    println!("table:  {}", csv_path.display());
    Ok(all_passed)
}

fn merge(args: MergeArgs) -> Result<bool> {
    let (path, count) = shard::merge(&args.parts, &args.out)?;
    println!("merged {} part(s): {count} points -> {}", args.parts.len(), path.display());
    Ok(true)
}

fn diff(args: DiffArgs) -> ExitCode {
    let load = |p: &PathBuf| report::load_report(p);
    let (a, b) = match (load(&args.a), load(&args.b)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match report::diff_reports(&a, &b) {
        Ok(diffs) if diffs.is_empty() => ExitCode::SUCCESS,
        Ok(diffs) => {
            for d in &diffs {
                println!("{d}");
            }
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
