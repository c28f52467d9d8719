//! morpipe: batch front-end for the model order reduction toolkit.
//!
//! Exit codes: 0 success, 1 user/config error, 2 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use morpipe::error::Error;

use commands::JobContext;

#[derive(Parser)]
#[command(
    name = "morpipe",
    version,
    about = "Model order reduction pipeline: FFD geometry, active subspaces, DMD, PODI and surrogate-driven optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct JobArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "./out")]
    out: PathBuf,
    /// Dotted-path config override, e.g. --set sampling.seed=7 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Override the seed used by the subcommand.
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent offline evaluations (default: MORPIPE_JOBS or all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Suppress progress records on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct DeformArgs {
    /// FFD lattice JSON.
    #[arg(long)]
    config: PathBuf,
    /// Input STL file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output STL file (format mirrors the input).
    #[arg(long, default_value = "./out/deformed.stl")]
    out: PathBuf,
    /// Dotted-path config override (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Suppress progress records on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// JSON configuration file to check.
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path config override (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Deform an STL mesh through a free-form deformation lattice.
    Deform(DeformArgs),
    /// Fit a dynamic mode decomposition and export reconstruction, forecast
    /// and spectrum data.
    Dmd(JobArgs),
    /// Identify the active subspace of a scalar output.
    As(JobArgs),
    /// Predict solution fields at new parameters from a snapshot database.
    Podi(JobArgs),
    /// Sample the parameter space and build the snapshot database.
    Offline(JobArgs),
    /// Optimize over the surrogate response of a snapshot database.
    Optimize(JobArgs),
    /// Check a configuration file against its schema.
    Validate(ValidateArgs),
}

fn job_context(args: &JobArgs) -> JobContext {
    JobContext {
        out: args.out.clone(),
        quiet: args.quiet,
        seed: args.seed,
        jobs: args.jobs,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Deform(args) => {
            let cfg = config::load_config(&args.config, &args.set)?;
            commands::cmd_deform(cfg, &args.input, &args.out, args.quiet)
        }
        Command::Dmd(args) => {
            let cfg = config::load_config(&args.config, &args.set)?;
            commands::cmd_dmd(cfg, &job_context(&args))
        }
        Command::As(args) => {
            let cfg = config::load_config(&args.config, &args.set)?;
            commands::cmd_as(cfg, &job_context(&args))
        }
        Command::Podi(args) => {
            let cfg = config::load_config(&args.config, &args.set)?;
            commands::cmd_podi(cfg, &job_context(&args))
        }
        Command::Offline(args) => {
            let cfg = config::load_config(&args.config, &args.set)?;
            commands::cmd_offline(cfg, &job_context(&args))
        }
        Command::Optimize(args) => {
            let cfg = config::load_config(&args.config, &args.set)?;
            commands::cmd_optimize(cfg, &job_context(&args))
        }
        Command::Validate(args) => {
            let cfg = config::load_config(&args.config, &args.set)?;
            commands::cmd_validate(cfg, args.quiet)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
