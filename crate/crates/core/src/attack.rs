//! Scripted attacks on the untrusted side.
//!
//! Every attack is expressed as a change to what the CPU does: how long a
//! job runs, when it is released, which timing messages it emits and what it
//! writes to the actuation register. Nothing here can reach the monitor or
//! the decision module.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::ActuationCmd;
use crate::side_channel::{MessageKind, TimingMessage};
use crate::time::{SimDuration, SimTime};

pub const DEFAULT_LOOP_COST_CYCLES: u64 = 6_000;

fn default_loop_cost() -> u64 {
    DEFAULT_LOOP_COST_CYCLES
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackKind {
    None,
    /// Malicious loop appended to the control job.
    Overrun {
        loop_bound: u32,
        #[serde(default = "default_loop_cost")]
        per_iteration_cycles: u64,
    },
    /// Jobs cut short to `factor` of their normal length.
    Undertime { factor: f64 },
    /// Each release after the start is shifted by `drift_ns` relative to the
    /// previous one.
    PeriodDrift { drift_ns: i64 },
    /// Idle heartbeats stop; the slack is used for hidden work.
    IdleSilence,
    /// Saturated voltage toward the falling side, written by injected code
    /// whose loop leaves the usual timing footprint.
    Destabilize {
        #[serde(default = "one")]
        loop_bound: u32,
        #[serde(default = "default_loop_cost")]
        per_iteration_cycles: u64,
    },
    /// Legitimate timing messages are suppressed and a recording of earlier
    /// periods is replayed in their place.
    Replay {
        #[serde(default = "one")]
        window_periods: u32,
        #[serde(default)]
        destabilize: bool,
        #[serde(default)]
        overrun_bound: u32,
        #[serde(default = "default_loop_cost")]
        per_iteration_cycles: u64,
        /// Delay added to the end of the first replayed job.
        #[serde(default)]
        stretch_first_job_ns: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    #[serde(rename = "start_time_ns")]
    pub start_time: SimTime,
    pub kind: AttackKind,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec::none()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("replay recording is empty")]
    EmptyRecording,
    #[error("attack parameter `{0}` is out of range")]
    InvalidParameter(&'static str),
}

impl AttackSpec {
    pub fn none() -> Self {
        AttackSpec { start_time: SimTime::ZERO, kind: AttackKind::None }
    }

    pub fn new(start_time: SimTime, kind: AttackKind) -> Self {
        AttackSpec { start_time, kind }
    }

    pub fn is_active_at(&self, t: SimTime) -> bool {
        !matches!(self.kind, AttackKind::None) && t >= self.start_time
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        match self.kind {
            AttackKind::None | AttackKind::IdleSilence => Ok(()),
            AttackKind::Overrun { .. } => Ok(()),
            AttackKind::Undertime { factor } if !(factor > 0.0 && factor < 1.0) => {
                Err(AttackError::InvalidParameter("factor"))
            }
            AttackKind::Undertime { .. } => Ok(()),
            AttackKind::PeriodDrift { drift_ns: 0 } => Err(AttackError::InvalidParameter("drift_ns")),
            AttackKind::PeriodDrift { .. } => Ok(()),
            AttackKind::Destabilize { .. } => Ok(()),
            AttackKind::Replay { window_periods: 0, .. } => Err(AttackError::InvalidParameter("window_periods")),
            AttackKind::Replay { .. } => Ok(()),
        }
    }
}

/// Job length with the malicious loop appended. A bound of zero disables it.
pub fn apply_overrun(base_cycles: u64, loop_bound: u32, per_iteration_cycles: u64) -> u64 {
    base_cycles + u64::from(loop_bound) * per_iteration_cycles
}

/// Full voltage toward the side the pole already leans to; upright counts as
/// positive.
pub fn apply_destabilize(theta: f64, limit: f64) -> ActuationCmd {
    ActuationCmd::new(if theta >= 0.0 { limit } else { -limit })
}

/// Job length scaled down by `factor`, rounded toward zero.
pub fn apply_undertime(base_cycles: u64, factor: f64) -> u64 {
    (base_cycles as f64 * factor) as u64
}

/// Next release under drift: the nominal spacing plus `drift_ns`, never
/// earlier than `previous`.
pub fn apply_period_drift(previous: SimTime, period: SimDuration, drift_ns: i64) -> SimTime {
    let next = previous.as_nanos() as i128 + period.as_nanos() as i128 + drift_ns as i128;
    SimTime(next.max(previous.as_nanos() as i128) as u64)
}

/// Heartbeat send time, or `None` when the attack has silenced it.
pub fn apply_idle_silence(heartbeat: SimTime, start_time: SimTime) -> Option<SimTime> {
    (heartbeat < start_time).then_some(heartbeat)
}

/// A message the attacker will issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedSend {
    pub kind: MessageKind,
    pub send_time: SimTime,
}

/// Re-issues a recorded window with its original spacing, starting at `now`.
pub fn apply_replay(recorded: &[TimingMessage], now: SimTime) -> Result<Vec<InjectedSend>, AttackError> {
    let first = recorded.first().ok_or(AttackError::EmptyRecording)?.send_time;
    Ok(recorded
        .iter()
        .map(|m| InjectedSend { kind: m.kind, send_time: now + (m.send_time - first) })
        .collect())
}

/// Delays the first `EndControl` of a replayed window, and everything after
/// it, by `by`.
pub fn stretch_first_job(sends: &mut [InjectedSend], by: SimDuration) {
    if let Some(i) = sends.iter().position(|s| s.kind == MessageKind::EndControl) {
        for s in &mut sends[i..] {
            s.send_time += by;
        }
    }
}
