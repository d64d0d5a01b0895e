use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdarcy::commands::{self, CommandOptions};
use pdarcy::config::RunConfig;
use pdarcy::CliError;

#[derive(Debug, Parser)]
#[command(name = "pdarcy", version, about = "Darcy flow with pressure-dependent permeability by splitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Run even when the data sign conditions fail.
    #[arg(long)]
    override_sign_checks: bool,
    /// Threads used to run study levels concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output file, replacing the path set in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the configured mesh to a text file.
    MeshGen(Common),
    /// Report the data sign conditions; exits with 2 when one fails.
    CheckData(Common),
    /// Run the splitting scheme and write a VTK file.
    Solve(Common),
    /// Minimum of q_h over a sequence of meshes, as CSV.
    StudyPositivity(Common),
    /// Errors against the exact solution over a sequence of meshes, as CSV.
    StudyConvergence(Common),
}

fn run(command: Command) -> Result<(), CliError> {
    let (common, f): (Common, fn(&RunConfig, &CommandOptions, &mut dyn std::io::Write) -> Result<(), CliError>) =
        match command {
            Command::MeshGen(c) => (c, commands::mesh_gen),
            Command::CheckData(c) => (c, commands::check_data),
            Command::Solve(c) => (c, commands::solve),
            Command::StudyPositivity(c) => (c, |cfg, o, out| commands::study_positivity(cfg, o, out).map(drop)),
            Command::StudyConvergence(c) => (c, |cfg, o, out| commands::study_convergence(cfg, o, out).map(drop)),
        };
    let cfg = RunConfig::load(&common.config)?;
    let opts = CommandOptions {
        override_sign_checks: common.override_sign_checks,
        workers: common.workers,
        out: common.out,
    };
    f(&cfg, &opts, &mut std::io::stdout().lock())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
