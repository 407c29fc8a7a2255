use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use halfdiff::cli::run::{run, Command};

#[derive(Parser)]
#[command(name = "halfdiff", version, about = "Forward solves, reduction checks, Carleman checks and inverse-source runs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Output directory; overrides the config and the environment.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the forward problem and write the snapshot at t0.
    Forward { config: PathBuf },
    /// Check the reduced equation and the two reduced sources.
    ReduceCheck { config: PathBuf },
    /// Build the weight geometry and run the weighted inequality checks.
    CarlemanCheck { config: PathBuf },
    /// Reconstruct f from synthetic data u(., t0).
    Invert { config: PathBuf },
    /// Noise sweep and log-log fit of the reconstruction error.
    StabilityExperiment { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let (cmd, config) = match cli.command {
        Cmd::Forward { config } => (Command::Forward, config),
        Cmd::ReduceCheck { config } => (Command::ReduceCheck, config),
        Cmd::CarlemanCheck { config } => (Command::CarlemanCheck, config),
        Cmd::Invert { config } => (Command::Invert, config),
        Cmd::StabilityExperiment { config } => (Command::StabilityExperiment, config),
    };
    match run(cmd, &config, cli.output_dir.as_deref()) {
        Ok(out) => {
            println!(
                "{}: wrote {} file(s) to {} ({:.2} s)",
                cmd.name(),
                out.files.len(),
                out.directory.display(),
                out.manifest.wall_time_s
            );
            ExitCode::SUCCESS
        }
        Err(fail) => {
            eprintln!("error: {fail}");
            ExitCode::from(fail.exit_code())
        }
    }
}
