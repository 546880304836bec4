//! `gclab`: batch runner for the Donaldson-functional experiments.

mod commands;
mod config;
mod error;
mod output;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Overrides};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "gclab", version, about = "Donaldson-functional experiments on the Bolza surface")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Coupling for `solve`.
    #[arg(long, global = true)]
    t: Option<f64>,
    /// Class spec: zero, unit:j, random[:seed], point:x,y or explicit:re,im,...
    #[arg(long, global = true)]
    class: Option<String>,
    #[arg(long, global = true)]
    mesh_level: Option<u32>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Build and cache the mesh.
    Mesh,
    /// Build and cache the differentials basis.
    Basis,
    /// Minimize at a single t.
    Solve,
    /// Warm-started minimization along the t schedule.
    Continuation,
    /// Distance from the class to the Kodaira curve.
    KodairaScan,
    /// Point class against a random class along the schedule.
    BlowupProbe,
    /// Monotonicity and rho-limit report over a results directory.
    Report,
}

fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let overrides = Overrides {
        t: cli.t,
        class: cli.class.clone(),
        mesh_level: cli.mesh_level,
        out: cli.out.clone(),
    };
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Mesh => commands::mesh(&cfg),
        Command::Basis => commands::basis(&cfg),
        Command::Solve => commands::solve(&cfg),
        Command::Continuation => commands::continuation(&cfg),
        Command::KodairaScan => commands::kodaira_scan(&cfg),
        Command::BlowupProbe => commands::blowup_probe(&cfg),
        Command::Report => commands::report(&cfg),
    }
}

fn fail(err: CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(CliError::Config(e.to_string())),
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
