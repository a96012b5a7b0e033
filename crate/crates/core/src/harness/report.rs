//! Run outputs: the summary report, the plant trace and the event log.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decision::{Cause, Controller};
use crate::monitor::{Clock, FsmConfig, Location, Verdict, VerdictKind};
use crate::side_channel::{MessageKind, Origin};
use crate::time::SimTime;

use super::scenario::MonitorMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSwitch {
    pub time_ns: SimTime,
    pub to: Controller,
    pub cause: Cause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub mode: MonitorMode,
    pub horizon_ns: u64,
    pub end_time_ns: SimTime,
    /// Control jobs released.
    pub iterations: u64,
    /// First switch to the safety controller.
    pub detection_time_ns: Option<SimTime>,
    pub detection_cause: Option<Cause>,
    /// Monitor verdict at the end of the run.
    pub verdict: VerdictKind,
    /// First timing violation, whether or not it reached the decision module.
    pub first_violation: Option<Verdict>,
    pub violations: u64,
    pub attack_start_ns: Option<SimTime>,
    pub first_infected_release_ns: Option<SimTime>,
    /// Arrival of the first infected job's `StartControl` at the monitor.
    pub first_infected_start_arrival_ns: Option<SimTime>,
    /// Detection time minus the first infected release.
    pub detection_latency_ns: Option<u64>,
    /// First timing violation minus the infected job's start arrival.
    pub timing_detection_latency_ns: Option<u64>,
    pub first_unsafe_time_ns: Option<SimTime>,
    pub plant_destroyed: bool,
    pub destroyed_time_ns: Option<SimTime>,
    pub mode_switches: Vec<ModeSwitch>,
    /// Longest job among infected iterations.
    pub max_malicious_exec_ns: Option<u64>,
    pub max_exec_ns: u64,
    pub messages_sent: u64,
    pub messages_delivered: u64,
    pub messages_injected: u64,
    pub messages_per_job: u64,
    /// CPU time spent issuing timing messages, per control job.
    pub sender_overhead_per_iteration_ns: u64,
    pub fsm: FsmConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_ns: u64,
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub voltage: f64,
    pub mode: Controller,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventRecord {
    Message {
        t_ns: SimTime,
        kind: MessageKind,
        origin: Origin,
        send_ns: SimTime,
        arrival_ns: SimTime,
        location: Location,
    },
    Timer {
        t_ns: SimTime,
        clock: Clock,
        location: Location,
    },
    Verdict {
        t_ns: SimTime,
        kind: VerdictKind,
        location: Location,
    },
    ModeSwitch {
        t_ns: SimTime,
        to: Controller,
        cause: Cause,
    },
    Attack {
        t_ns: SimTime,
        action: String,
        iteration: Option<u64>,
    },
    OperatorReset {
        t_ns: SimTime,
        accepted: bool,
    },
    PlantUnsafe {
        t_ns: SimTime,
    },
    PlantDestroyed {
        t_ns: SimTime,
    },
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub trace: Vec<TraceRow>,
    pub events: Vec<EventRecord>,
}

impl RunOutput {
    pub fn trace_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.trace {
            w.serialize(row).expect("trace rows serialize");
        }
        if self.trace.is_empty() {
            w.write_record(["t_ns", "x", "x_dot", "theta", "theta_dot", "voltage", "mode"]).expect("header");
        }
        w.into_inner().expect("in-memory writer")
    }

    pub fn events_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for e in &self.events {
            serde_json::to_writer(&mut out, e).expect("events serialize");
            out.push(b'\n');
        }
        out
    }

    pub fn report_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(&self.report).expect("report serializes");
        out.push(b'\n');
        out
    }

    /// Writes `trace.csv`, `events.jsonl`, `report.json` and `fsm.json`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trace.csv"), self.trace_csv())?;
        std::fs::write(dir.join("events.jsonl"), self.events_jsonl())?;
        std::fs::write(dir.join("report.json"), self.report_json())?;
        write_json(&dir.join("fsm.json"), &self.report.fsm)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(std::io::Error::other)?;
    f.write_all(b"\n")
}
