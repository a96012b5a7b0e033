//! Command-line front end.
//!
//! Exit codes: 0 run completed, 1 I/O failure, 2 configuration error,
//! 3 plant destroyed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use secure_simplex::harness::{
    profile_and_derive, run_scenario, run_sweep, sweep_csv, write_json, RunError, Scenario, SweepError,
};

#[derive(Parser)]
#[command(name = "s3a-sim", version, about = "Simplex controller with a timing side-channel monitor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, events.jsonl, report.json and fsm.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a scenario once per value of a numeric field and write sweep.csv.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Dotted field path, e.g. attack.kind.overrun.loop_bound
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the profiling campaign and write profile.json and fsm.json.
    Profile {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        iterations: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

const CONFIG_ERROR: u8 = 2;
const PLANT_DESTROYED: u8 = 3;

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(CONFIG_ERROR)
}

fn io_error(dir: &Path, e: std::io::Error) -> ExitCode {
    eprintln!("cannot write {}: {e}", dir.display());
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario, out, seed } => {
            let mut s = match Scenario::load(&scenario) {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let output = match run_scenario(&s) {
                Ok(o) => o,
                Err(RunError::Config(e)) => return config_error(e),
                Err(e) => return config_error(e),
            };
            if let Err(e) = output.write_to(&out) {
                return io_error(&out, e);
            }
            let r = &output.report;
            match r.detection_time_ns {
                Some(t) => println!("{}: detected at {t} ({:?})", r.scenario, r.detection_cause.unwrap()),
                None => println!("{}: no detection over {} iterations", r.scenario, r.iterations),
            }
            if r.plant_destroyed {
                eprintln!("plant destroyed at {}", r.destroyed_time_ns.unwrap());
                return ExitCode::from(PLANT_DESTROYED);
            }
            ExitCode::SUCCESS
        }
        Command::Sweep { scenario, axis, values, out } => {
            let s = match Scenario::load(&scenario) {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            let rows = match run_sweep(&s, &axis, &values) {
                Ok(rows) => rows,
                Err(e @ SweepError::Run { .. }) => {
                    eprintln!("{e}");
                    return ExitCode::FAILURE;
                }
                Err(e) => return config_error(e),
            };
            if let Err(e) = std::fs::create_dir_all(&out).and_then(|_| std::fs::write(out.join("sweep.csv"), sweep_csv(&rows))) {
                return io_error(&out, e);
            }
            println!("{} runs written to {}", rows.len(), out.join("sweep.csv").display());
            ExitCode::SUCCESS
        }
        Command::Profile { scenario, iterations, out } => {
            let s = match Scenario::load(&scenario) {
                Ok(s) => s,
                Err(e) => return config_error(e),
            };
            let outcome = match profile_and_derive(&s, iterations) {
                Ok(o) => o,
                Err(e) => return config_error(e),
            };
            let written = std::fs::create_dir_all(&out)
                .and_then(|_| write_json(&out.join("profile.json"), &outcome))
                .and_then(|_| write_json(&out.join("fsm.json"), &outcome.fsm));
            if let Err(e) = written {
                return io_error(&out, e);
            }
            let p = &outcome.profile;
            println!(
                "steady band {}..{} cycles (width {}, {} ns), worst {}",
                p.steady_low, p.steady_high, p.steady_width(), outcome.steady_width_ns, p.worst
            );
            ExitCode::SUCCESS
        }
    }
}
