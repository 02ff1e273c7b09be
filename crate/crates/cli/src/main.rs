use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use liact::{run_scenario, RunOptions};

#[derive(Parser)]
#[command(name = "liact", version, about = "Integrate infinitesimal Lie (super)algebra actions given as vector fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of a scenario file and write a JSON report.
    Run {
        scenario: PathBuf,
        /// Output directory for the report and polylines.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run independent tasks on this many threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LIACT_LOG", "warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, seed, jobs } => {
            let outcome = run_scenario(&scenario, &RunOptions { out, seed, jobs });
            if let Some(p) = &outcome.report_path {
                println!("{}", p.display());
            }
            if let Some(e) = &outcome.report.error {
                eprintln!("error: {e}");
            }
            for r in &outcome.report.results {
                if let Some(m) = &r.message {
                    eprintln!("task {} ({}): {m}", r.index, r.kind);
                }
            }
            ExitCode::from(outcome.exit_code as u8)
        }
    }
}
