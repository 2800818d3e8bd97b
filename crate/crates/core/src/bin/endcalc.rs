use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use endcalc::workbench::{run, ExperimentConfig, ExperimentId, Summary};

#[derive(Parser)]
#[command(name = "endcalc", version, about = "Functional calculus experiments on warped ends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Warp conditions, metric tensor and weight checks.
    CheckMetric(Args),
    /// Resolvent parametrix residual rates and symbol structure.
    Parametrix(Args),
    /// Contour-integral functional calculus against exact values.
    Funcalc(Args),
    /// Convergence rate of the functional-calculus expansion.
    Convergence(Args),
    /// Weighted Lp probes of the expansion remainder.
    Norms(Args),
    /// Rank-one lower bounds for the hyperbolic kernel.
    HyperbolicAppendix(Args),
    /// Commutator norms across grid refinements.
    Commutators(Args),
    /// L2 to L-infinity resolvent scaling.
    Sobolev(Args),
    /// Every experiment listed in the config, or all of them if none is listed.
    All(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the internal sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for random sampling; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (only, args) = match cli.command {
        Command::CheckMetric(a) => (Some(ExperimentId::CheckMetric), a),
        Command::Parametrix(a) => (Some(ExperimentId::Parametrix), a),
        Command::Funcalc(a) => (Some(ExperimentId::Funcalc), a),
        Command::Convergence(a) => (Some(ExperimentId::Convergence), a),
        Command::Norms(a) => (Some(ExperimentId::Norms), a),
        Command::HyperbolicAppendix(a) => (Some(ExperimentId::HyperbolicAppendix), a),
        Command::Commutators(a) => (Some(ExperimentId::Commutators), a),
        Command::Sobolev(a) => (Some(ExperimentId::Sobolev), a),
        Command::All(a) => (None, a),
    };
    match execute(only, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("endcalc: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(only: Option<ExperimentId>, args: Args) -> endcalc::Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = args.out {
        cfg.output.dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    match only {
        Some(id) => cfg.experiments = vec![id],
        None if cfg.experiments.is_empty() => cfg.experiments = ExperimentId::ALL.to_vec(),
        None => {}
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| endcalc::Error::Config(e.to_string()))?;
    }
    let manifest = run(&cfg)?;
    for rec in &manifest.experiments {
        match &rec.error {
            None => println!("{:<20} ok     {:>8.1}s  {} files", rec.id.id(), rec.wall_seconds, rec.outputs.len()),
            Some(e) => println!("{:<20} ERROR  {:>8.1}s  {e}", rec.id.id(), rec.wall_seconds),
        }
    }
    let mut all_pass = manifest.ok();
    if let Some(path) = &manifest.summary {
        let summary: Summary = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        for c in &summary.checks {
            println!("{} [{}] {} = {:.4e} (threshold {:?} {})", if c.pass { "PASS" } else { "FAIL" }, c.criterion, c.name, c.value, c.relation, c.threshold);
        }
        all_pass &= summary.all_pass;
    }
    println!("outputs in {}  config {}", cfg.output.dir.display(), &manifest.config_hash[..12]);
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
