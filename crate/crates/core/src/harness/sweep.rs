//! One-dimensional parameter sweeps over a base scenario.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::decision::Cause;
use crate::monitor::VerdictKind;
use crate::time::SimTime;

use super::engine::{run_scenario, RunError};
use super::report::RunReport;
use super::scenario::{ConfigError, Scenario};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),
    #[error("sweep axis `{0}` is not a numeric field")]
    NotNumeric(String),
    #[error("sweep value `{0}` is not a number")]
    InvalidValue(String),
    #[error("value `{value}`: {source}")]
    Config { value: String, source: ConfigError },
    #[error("value `{value}`: {source}")]
    Run { value: String, source: RunError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub detection_time_ns: Option<SimTime>,
    pub detection_cause: Option<Cause>,
    pub verdict: VerdictKind,
    pub detection_latency_ns: Option<u64>,
    pub timing_detection_latency_ns: Option<u64>,
    pub violations: u64,
    pub first_unsafe_time_ns: Option<SimTime>,
    pub plant_destroyed: bool,
    pub iterations: u64,
    pub max_exec_ns: u64,
    pub max_malicious_exec_ns: Option<u64>,
}

impl SweepRow {
    fn new(axis: &str, value: &str, r: &RunReport) -> Self {
        SweepRow {
            axis: axis.to_owned(),
            value: value.to_owned(),
            detection_time_ns: r.detection_time_ns,
            detection_cause: r.detection_cause,
            verdict: r.verdict,
            detection_latency_ns: r.detection_latency_ns,
            timing_detection_latency_ns: r.timing_detection_latency_ns,
            violations: r.violations,
            first_unsafe_time_ns: r.first_unsafe_time_ns,
            plant_destroyed: r.plant_destroyed,
            iterations: r.iterations,
            max_exec_ns: r.max_exec_ns,
            max_malicious_exec_ns: r.max_malicious_exec_ns,
        }
    }
}

const HEADER: [&str; 13] = [
    "axis",
    "value",
    "detection_time_ns",
    "detection_cause",
    "verdict",
    "detection_latency_ns",
    "timing_detection_latency_ns",
    "violations",
    "first_unsafe_time_ns",
    "plant_destroyed",
    "iterations",
    "max_exec_ns",
    "max_malicious_exec_ns",
];

pub fn sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(HEADER).expect("header");
    for row in rows {
        w.serialize(row).expect("rows serialize");
    }
    w.into_inner().expect("in-memory writer")
}

fn slot<'v>(root: &'v mut Value, axis: &str) -> Option<&'v mut Value> {
    axis.split('.').try_fold(root, |node, key| node.as_object_mut()?.get_mut(key))
}

/// Copy of `base` with the numeric field at `axis` replaced by `value`.
pub fn scenario_with(base: &Scenario, axis: &str, value: &str) -> Result<Scenario, SweepError> {
    let mut root = serde_json::to_value(base).expect("scenario serializes");
    let target = slot(&mut root, axis).ok_or_else(|| SweepError::UnknownAxis(axis.to_owned()))?;
    if !target.is_number() {
        return Err(SweepError::NotNumeric(axis.to_owned()));
    }
    let parsed: Value = serde_json::from_str(value.trim()).map_err(|_| SweepError::InvalidValue(value.to_owned()))?;
    if !parsed.is_number() {
        return Err(SweepError::InvalidValue(value.to_owned()));
    }
    *target = parsed;
    Scenario::from_value(root).map_err(|source| SweepError::Config { value: value.to_owned(), source })
}

/// Runs `base` once per value of `axis`. Runs are independent and execute on
/// parallel threads; rows come back in input order.
pub fn run_sweep(base: &Scenario, axis: &str, values: &[String]) -> Result<Vec<SweepRow>, SweepError> {
    // reject a bad axis even when there is nothing to run
    let mut probe = serde_json::to_value(base).expect("scenario serializes");
    match slot(&mut probe, axis) {
        None => return Err(SweepError::UnknownAxis(axis.to_owned())),
        Some(v) if !v.is_number() => return Err(SweepError::NotNumeric(axis.to_owned())),
        Some(_) => {}
    }
    let scenarios = values.iter().map(|v| scenario_with(base, axis, v)).collect::<Result<Vec<_>, _>>()?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut rows = Vec::with_capacity(values.len());
    for (chunk_values, chunk) in values.chunks(workers).zip(scenarios.chunks(workers)) {
        let reports: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk.iter().map(|s| scope.spawn(move || run_scenario(s))).collect();
            handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
        });
        for (value, result) in chunk_values.iter().zip(reports) {
            let out = result.map_err(|source| SweepError::Run { value: value.clone(), source })?;
            rows.push(SweepRow::new(axis, value, &out.report));
        }
    }
    Ok(rows)
}
