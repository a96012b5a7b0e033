//! Periodic full-state feedback controllers.
//!
//! Both controllers share one law, `V = -(k_x x + k_xdot x' + k_theta theta +
//! k_thetadot theta')`, with velocities estimated by a backward difference of
//! consecutive sensor samples. They differ only in their gains.

use serde::{Deserialize, Serialize};

use crate::plant::{ActuationCmd, SensorReading};
use crate::time::SimDuration;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    pub k_x: f64,
    pub k_x_dot: f64,
    pub k_theta: f64,
    pub k_theta_dot: f64,
}

impl ControllerGains {
    /// Fast gains for the untrusted controller.
    pub const COMPLEX: ControllerGains =
        ControllerGains { k_x: -57.51, k_x_dot: -41.14, k_theta: 145.93, k_theta_dot: 31.27 };

    /// Gains of the verified controller; recover from every corner of the
    /// default envelope.
    pub const SAFETY: ControllerGains =
        ControllerGains { k_x: -58.04, k_x_dot: -70.89, k_theta: 251.79, k_theta_dot: 50.05 };

    pub fn is_finite(&self) -> bool {
        [self.k_x, self.k_x_dot, self.k_theta, self.k_theta_dot].iter().all(|k| k.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Complex,
    Safety,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlTaskConfig {
    #[serde(rename = "period_ns")]
    pub period: SimDuration,
    pub gains: ControllerGains,
    pub role: Role,
}

impl ControlTaskConfig {
    pub fn complex() -> Self {
        ControlTaskConfig { period: SimDuration::from_millis(20), gains: ControllerGains::COMPLEX, role: Role::Complex }
    }

    pub fn safety() -> Self {
        ControlTaskConfig { period: SimDuration::from_millis(20), gains: ControllerGains::SAFETY, role: Role::Safety }
    }
}

/// Unclamped control voltage.
pub fn feedback_voltage(
    gains: &ControllerGains,
    sensors: &SensorReading,
    previous: &SensorReading,
    period: SimDuration,
) -> f64 {
    assert!(period > SimDuration::ZERO, "controller period must be positive");
    let dt = period.as_secs_f64();
    let x_dot = (sensors.x - previous.x) / dt;
    let theta_dot = (sensors.theta - previous.theta) / dt;
    -(gains.k_x * sensors.x + gains.k_x_dot * x_dot + gains.k_theta * sensors.theta + gains.k_theta_dot * theta_dot)
}

pub fn complex_control(
    cfg: &ControlTaskConfig,
    sensors: &SensorReading,
    previous: &SensorReading,
    voltage_limit: f64,
) -> ActuationCmd {
    debug_assert_eq!(cfg.role, Role::Complex);
    ActuationCmd::new(feedback_voltage(&cfg.gains, sensors, previous, cfg.period)).clamped(voltage_limit)
}

pub fn safety_control(
    cfg: &ControlTaskConfig,
    sensors: &SensorReading,
    previous: &SensorReading,
    voltage_limit: f64,
) -> ActuationCmd {
    debug_assert_eq!(cfg.role, Role::Safety);
    ActuationCmd::new(feedback_voltage(&cfg.gains, sensors, previous, cfg.period)).clamped(voltage_limit)
}
