use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wsl::report::{render_table, report};
use wsl::{run, CliError, ExperimentConfig, Kind, Status};

/// Waveguide spectral laboratory.
#[derive(Parser)]
#[command(name = "wsl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory, overriding `WSL_OUT` and the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Boundary sign condition, flaring and theorem class.
    CheckGeometry(RunArgs),
    /// Weighted resolvent norms over an energy/absorption grid.
    SweepResolvent(RunArgs),
    /// σ_min along the real axis and pole refinement.
    ScanResonances(RunArgs),
    /// Resonance-free balls around real energies.
    VerifyResfree(RunArgs),
    /// Wave propagation and local energy decay.
    Propagate(RunArgs),
    /// Multiplier identities under refinement and the Poincaré inequality.
    VerifyIdentities(RunArgs),
    /// Consolidated summary of every run under a directory.
    Report {
        dir: PathBuf,
    },
}

fn execute(kind: Kind, args: &RunArgs) -> Result<Status, CliError> {
    let (cfg, bytes) = ExperimentConfig::load(&args.config)?;
    if cfg.experiment.kind() != kind {
        return Err(CliError::Usage(format!(
            "config describes a {} experiment, not {}",
            cfg.experiment.kind().name(),
            kind.name()
        )));
    }
    if let Some(n) = args.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let out = args
        .out
        .clone()
        .or_else(|| std::env::var_os("WSL_OUT").map(PathBuf::from))
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(format!("wsl-out/{}", kind.name())));
    let outcome = run(&cfg, &bytes, &out)?;
    let s = &outcome.summary;
    println!("{} on {}: {}", kind.name(), s.domain, if s.passed { "passed" } else { "assertion failed" });
    for (k, v) in &s.metrics {
        println!("  {k} = {v}");
    }
    for n in &s.notes {
        println!("  {n}");
    }
    println!("outputs in {}", outcome.dir.display());
    Ok(if s.passed { Status::Success } else { Status::AssertionFailed })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::CheckGeometry(a) => execute(Kind::CheckGeometry, a),
        Command::SweepResolvent(a) => execute(Kind::SweepResolvent, a),
        Command::ScanResonances(a) => execute(Kind::ScanResonances, a),
        Command::VerifyResfree(a) => execute(Kind::VerifyResfree, a),
        Command::Propagate(a) => execute(Kind::Propagate, a),
        Command::VerifyIdentities(a) => execute(Kind::VerifyIdentities, a),
        Command::Report { dir } => report(dir).and_then(|c| {
            let path = dir.join("report.json");
            std::fs::write(&path, serde_json::to_vec_pretty(&c)?)?;
            print!("{}", render_table(&c));
            println!("summary written to {}", path.display());
            Ok(if c.all_passed { Status::Success } else { Status::AssertionFailed })
        }),
    };
    match result {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("wsl: {e}");
            ExitCode::from(Status::Usage as u8)
        }
    }
}
