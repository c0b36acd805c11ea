//! Command-line front end: runs one task of a JSON configuration and prints
//! the task summary as JSON.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spectral_maxwell::config::{run_task, Config, Task};

#[derive(Parser)]
#[command(name = "spectral-maxwell", version, about = "Spectral Galerkin electromagnetic scattering by penetrable bodies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task named in the configuration.
    Run(Common),
    /// Solve one scattering problem; write rcs.csv, farfield.csv and solution.bin.
    Solve(Common),
    /// Far-field error against the Mie series for each configured degree; write errors.csv.
    MieCheck(Common),
    /// Reciprocity residual for each configured degree; write errors.csv.
    Reciprocity(Common),
    /// Condition numbers of the stabilized and unstabilized systems; write sweep.csv.
    CondSweep(Common),
    /// Determinants of the coupling counterexamples; write counterexample.csv.
    Counterexample(Common),
    /// Electric field at off-surface points; write nearfield.csv.
    NearField(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, task) = match cli.command {
        Command::Run(c) => (c, None),
        Command::Solve(c) => (c, Some(Task::Solve)),
        Command::MieCheck(c) => (c, Some(Task::MieCheck)),
        Command::Reciprocity(c) => (c, Some(Task::Reciprocity)),
        Command::CondSweep(c) => (c, Some(Task::CondSweep)),
        Command::Counterexample(c) => (c, Some(Task::Counterexample)),
        Command::NearField(c) => (c, Some(Task::NearField)),
    };
    let result = Config::load(&common.config).and_then(|mut config| {
        if let Some(dir) = common.output_dir {
            config.output_dir = dir;
        }
        run_task(&config, task)
    });
    match result {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
