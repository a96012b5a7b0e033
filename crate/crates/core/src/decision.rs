//! Decision module: picks the complex or the safety command each tick.
//!
//! Safety mode latches. Only an operator reset returns control to the
//! complex controller.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monitor::Verdict;
use crate::plant::{is_safe, ActuationCmd, PlantState, SafetyEnvelope};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    Complex,
    Safety,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    None,
    PhysicalEnvelope,
    TimingViolation,
    Operator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub value: Controller,
    pub cause: Cause,
    #[serde(rename = "switch_time_ns")]
    pub switch_time: SimTime,
}

impl Default for Mode {
    fn default() -> Self {
        Mode::complex()
    }
}

impl Mode {
    pub fn complex() -> Self {
        Mode { value: Controller::Complex, cause: Cause::None, switch_time: SimTime::ZERO }
    }

    pub fn is_safety(&self) -> bool {
        self.value == Controller::Safety
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecisionError {
    #[error("operator reset requested while the complex controller is already active")]
    NotInSafetyMode,
}

/// Selects the command for this tick. A timing verdict takes precedence over
/// the physical check when both fire on the same tick.
pub fn decide(
    plant: &PlantState,
    env: &SafetyEnvelope,
    verdict: &Verdict,
    complex_cmd: ActuationCmd,
    safety_cmd: ActuationCmd,
    mode: Mode,
    now: SimTime,
) -> (ActuationCmd, Mode) {
    if mode.is_safety() {
        return (safety_cmd, mode);
    }
    let cause = if verdict.is_violation() {
        Cause::TimingViolation
    } else if !is_safe(plant, env) {
        Cause::PhysicalEnvelope
    } else {
        return (complex_cmd, mode);
    };
    (safety_cmd, Mode { value: Controller::Safety, cause, switch_time: now })
}

pub fn operator_reset(mode: Mode, now: SimTime) -> Result<Mode, DecisionError> {
    if !mode.is_safety() {
        return Err(DecisionError::NotInSafetyMode);
    }
    Ok(Mode { value: Controller::Complex, cause: Cause::None, switch_time: now })
}
