use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use segsolve::run::default_out;
use segsolve::{run, CliError, Command, Config, Overrides};

#[derive(Parser)]
#[command(
    name = "segsolve",
    version,
    about = "Nonlocal segregation solver and free-boundary diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve at `solver.eps`; write fields, convergence log and metadata.
    Solve(Args),
    /// Run the ε schedule and write a geometry report per step.
    Sweep(Args),
    /// Recompute the geometry report from fields stored in the output directory.
    Analyze(Args),
    /// Dilation perimeter ratios of synthetic shapes.
    Perimeter(Args),
    /// Check the scenario's assumptions only.
    Validate(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Scenario file, or `bundled:<name>`.
    #[arg(long)]
    config: String,
    /// Output directory, default `out/<scenario name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Frame width W of the wide stencil.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=32))]
    frames: Option<u32>,
    /// Seed of the random shape in `perimeter`.
    #[arg(long)]
    seed: Option<u64>,
}

fn threads_from_env() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SEGSOLVE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SEGSOLVE_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn execute(cli: Cli) -> Result<String, CliError> {
    threads_from_env()?;
    let (cmd, args) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Analyze(a) => (Command::Analyze, a),
        Cmd::Perimeter(a) => (Command::Perimeter, a),
        Cmd::Validate(a) => (Command::Validate, a),
    };
    let mut cfg = Config::load(&args.config)?;
    Overrides {
        frames: args.frames,
        seed: args.seed,
    }
    .apply(&mut cfg);
    let out = args.out.unwrap_or_else(|| default_out(&cfg));
    run(cmd, cfg, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
