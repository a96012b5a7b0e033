//! Cart-pole plant driven by a DC motor.
//!
//! Angles are measured from upright. A positive angle leans the pole toward
//! negative `x`, so a positive motor voltage pushes the cart forward and
//! swings the pole further toward positive angle.

use serde::{Deserialize, Serialize};

use crate::time::SimDuration;

/// Integration substep.
pub const SUBSTEP: SimDuration = SimDuration::from_millis(1);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_half_length: f64,
    pub gravity: f64,
    /// Force per volt at the cart, N/V.
    pub motor_gain: f64,
    /// Viscous cart friction including motor back-EMF, N·s/m.
    pub cart_friction: f64,
    /// Viscous pivot friction, N·m·s/rad.
    pub pole_friction: f64,
    pub track_half_length: f64,
    pub voltage_limit: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            cart_mass: 0.57,
            pole_mass: 0.23,
            pole_half_length: 0.3,
            gravity: 9.81,
            motor_gain: 0.6,
            cart_friction: 1.0,
            pole_friction: 0.0,
            track_half_length: 0.4,
            voltage_limit: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidParams(pub &'static str);

impl PlantParams {
    pub fn validate(&self) -> Result<(), InvalidParams> {
        let positive = [
            (self.cart_mass, "cart_mass"),
            (self.pole_mass, "pole_mass"),
            (self.pole_half_length, "pole_half_length"),
            (self.track_half_length, "track_half_length"),
            (self.voltage_limit, "voltage_limit"),
        ];
        for (v, name) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(InvalidParams(name));
            }
        }
        let non_negative = [
            (self.gravity, "gravity"),
            (self.cart_friction, "cart_friction"),
            (self.pole_friction, "pole_friction"),
        ];
        for (v, name) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(InvalidParams(name));
            }
        }
        if !self.motor_gain.is_finite() {
            return Err(InvalidParams("motor_gain"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl PlantState {
    pub const UPRIGHT: PlantState = PlantState { x: 0.0, x_dot: 0.0, theta: 0.0, theta_dot: 0.0 };

    pub fn new(x: f64, x_dot: f64, theta: f64, theta_dot: f64) -> Self {
        PlantState { x, x_dot, theta, theta_dot }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        PlantState { x: a[0], x_dot: a[1], theta: a[2], theta_dot: a[3] }
    }

    fn axpy(&self, h: f64, d: &[f64; 4]) -> PlantState {
        PlantState {
            x: self.x + h * d[0],
            x_dot: self.x_dot + h * d[1],
            theta: self.theta + h * d[2],
            theta_dot: self.theta_dot + h * d[3],
        }
    }
}

impl std::ops::Neg for PlantState {
    type Output = PlantState;
    fn neg(self) -> PlantState {
        PlantState { x: -self.x, x_dot: -self.x_dot, theta: -self.theta, theta_dot: -self.theta_dot }
    }
}

/// Motor voltage command.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActuationCmd {
    pub voltage: f64,
}

impl ActuationCmd {
    pub fn new(voltage: f64) -> Self {
        ActuationCmd { voltage }
    }

    pub fn clamped(self, limit: f64) -> Self {
        ActuationCmd { voltage: self.voltage.clamp(-limit, limit) }
    }
}

/// Box-shaped region the decision module treats as recoverable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyEnvelope {
    pub max_x: f64,
    pub max_theta: f64,
    pub max_x_dot: f64,
    pub max_theta_dot: f64,
}

impl Default for SafetyEnvelope {
    fn default() -> Self {
        SafetyEnvelope { max_x: 0.05, max_theta: 0.03, max_x_dot: 0.234, max_theta_dot: 0.589 }
    }
}

impl SafetyEnvelope {
    pub fn validate(&self, params: &PlantParams) -> Result<(), InvalidParams> {
        for (v, name) in [
            (self.max_x, "max_x"),
            (self.max_theta, "max_theta"),
            (self.max_x_dot, "max_x_dot"),
            (self.max_theta_dot, "max_theta_dot"),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(InvalidParams(name));
            }
        }
        if self.max_x >= params.track_half_length {
            return Err(InvalidParams("max_x"));
        }
        if self.max_theta >= std::f64::consts::FRAC_PI_2 {
            return Err(InvalidParams("max_theta"));
        }
        Ok(())
    }

    /// The 16 corners of the box.
    pub fn vertices(&self) -> Vec<PlantState> {
        let b = [self.max_x, self.max_x_dot, self.max_theta, self.max_theta_dot];
        (0..16u32)
            .map(|mask| {
                let mut a = b;
                for (i, v) in a.iter_mut().enumerate() {
                    if mask & (1 << i) != 0 {
                        *v = -*v;
                    }
                }
                PlantState::from_array(a)
            })
            .collect()
    }
}

/// Closed-interval membership in the envelope.
pub fn is_safe(state: &PlantState, env: &SafetyEnvelope) -> bool {
    state.x.abs() <= env.max_x
        && state.theta.abs() <= env.max_theta
        && state.x_dot.abs() <= env.max_x_dot
        && state.theta_dot.abs() <= env.max_theta_dot
}

/// Pole fallen, cart off the track, or numerically blown up.
pub fn is_destroyed(state: &PlantState, params: &PlantParams) -> bool {
    !state.is_finite()
        || state.theta.abs() >= std::f64::consts::FRAC_PI_2
        || state.x.abs() >= params.track_half_length
}

/// State derivative under a constant (already clamped) voltage.
pub fn derivative(s: &PlantState, voltage: f64, p: &PlantParams) -> [f64; 4] {
    let total = p.cart_mass + p.pole_mass;
    let ml = p.pole_mass * p.pole_half_length;
    let (sin, cos) = s.theta.sin_cos();
    let force = p.motor_gain * voltage - p.cart_friction * s.x_dot;
    let spin = ml * s.theta_dot * s.theta_dot * sin;
    let denom = p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos * cos / total);
    let theta_dd = (p.gravity * sin + cos * (force - spin) / total - p.pole_friction * s.theta_dot / ml) / denom;
    let x_dd = (force + ml * theta_dd * cos - spin) / total;
    [s.x_dot, x_dd, s.theta_dot, theta_dd]
}

fn rk4(s: &PlantState, voltage: f64, h: f64, p: &PlantParams) -> PlantState {
    let k1 = derivative(s, voltage, p);
    let k2 = derivative(&s.axpy(h / 2.0, &k1), voltage, p);
    let k3 = derivative(&s.axpy(h / 2.0, &k2), voltage, p);
    let k4 = derivative(&s.axpy(h, &k3), voltage, p);
    let mut d = [0.0; 4];
    for i in 0..4 {
        d[i] = k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i];
    }
    s.axpy(h / 6.0, &d)
}

/// Advances the plant by `dt` under a held voltage, using equal RK4 substeps
/// no longer than [`SUBSTEP`]. A zero `dt` returns the state unchanged.
pub fn step_dynamics(state: &PlantState, cmd: ActuationCmd, dt: SimDuration, p: &PlantParams) -> PlantState {
    let n = dt.as_nanos().div_ceil(SUBSTEP.as_nanos());
    if n == 0 {
        return *state;
    }
    let voltage = cmd.clamped(p.voltage_limit).voltage;
    let h = dt.as_secs_f64() / n as f64;
    let mut s = *state;
    for _ in 0..n {
        s = rk4(&s, voltage, h, p);
    }
    s
}

/// Total mechanical energy (kinetic plus pole potential above the pivot).
pub fn energy(s: &PlantState, p: &PlantParams) -> f64 {
    let (m, l) = (p.pole_mass, p.pole_half_length);
    let total = p.cart_mass + m;
    0.5 * total * s.x_dot * s.x_dot - m * l * s.x_dot * s.theta_dot * s.theta.cos()
        + (2.0 / 3.0) * m * l * l * s.theta_dot * s.theta_dot
        + m * p.gravity * l * s.theta.cos()
}

/// ADC resolution. Readings are rounded to the nearest step, ties to even.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantization {
    pub x_step: f64,
    pub theta_step: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub x: f64,
    pub theta: f64,
}

fn quantize(v: f64, step: f64) -> f64 {
    if step > 0.0 {
        (v / step).round_ties_even() * step
    } else {
        v
    }
}

pub fn read_sensors(state: &PlantState, quantization: Option<&Quantization>) -> SensorReading {
    match quantization {
        None => SensorReading { x: state.x, theta: state.theta },
        Some(q) => SensorReading { x: quantize(state.x, q.x_step), theta: quantize(state.theta, q.theta_step) },
    }
}
