//! Scenario loading, end-to-end runs, sweeps and the profiling campaign.

mod engine;
mod profile;
mod report;
mod scenario;
mod sweep;

pub use engine::{run_scenario, run_with_fsm, RunError};
pub use profile::{measurement_traces, profile_and_derive, resolve_fsm, ProfileOutcome};
pub use report::{write_json, EventRecord, ModeSwitch, RunOutput, RunReport, TraceRow};
pub use scenario::{ConfigError, DeriveSpec, EventDetail, FsmSource, MonitorMode, Scenario};
pub use sweep::{run_sweep, scenario_with, sweep_csv, SweepError, SweepRow};
