use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use slipflow_cli::{execute, ExperimentKind};

#[derive(Parser)]
#[command(name = "slipflow", version, about = "Run dislocation evolution and convergence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quasi-static evolution under a loading program.
    Simulate(RunArgs),
    /// Recovery-sequence convergence table.
    Gamma(RunArgs),
    /// Slip distance and its relaxations between two measures.
    Distance(RunArgs),
    /// Kernel identity diagnostics.
    KernelCheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Output directory; defaults to $SLIPFLOW_OUT/<config stem>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match try_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Gamma(a) => (ExperimentKind::Gamma, a),
        Command::Distance(a) => (ExperimentKind::Distance, a),
        Command::KernelCheck(a) => (ExperimentKind::KernelCheck, a),
    };
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let (report, paths) = execute(kind, &args.config, args.out.as_deref(), args.seed)?;
    for p in &paths {
        println!("{}", p.display());
    }
    // a failed diagnostic is a failed run
    if report.summary.get("all_pass") == Some(&serde_json::Value::Bool(false)) {
        eprintln!("kernel checks failed");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
