//! Scenario files: one JSON document per experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{AttackError, AttackKind, AttackSpec};
use crate::controllers::{ControlTaskConfig, ControllerGains, Role};
use crate::exec_model::{CpuModel, CycleRange, ExecTimeDistribution, GuardMargins};
use crate::monitor::FsmConfig;
use crate::plant::{PlantParams, PlantState, Quantization, SafetyEnvelope};
use crate::side_channel::ChannelModel;
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    pub fn invalid(path: impl Into<String>, message: impl ToString) -> Self {
        ConfigError::Invalid { path: path.into(), message: message.to_string() }
    }

    /// Dotted path of the offending field, when known.
    pub fn field_path(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { path, .. } => Some(path),
            ConfigError::Io { .. } => None,
        }
    }
}

/// Whether timing verdicts reach the decision module.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorMode {
    #[default]
    S3a,
    /// Physical envelope only.
    VanillaSimplex,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventDetail {
    /// Every message, timer and controller decision.
    #[default]
    Full,
    /// Verdicts, mode switches, attack actions and resets only.
    Summary,
}

/// How to obtain monitor parameters from a simulated profiling campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeriveSpec {
    pub profile_iterations: u64,
    /// Monitored segments per control job; `segments - 1` checkpoints.
    pub segments: usize,
    pub guards: GuardMargins,
    /// Cost of the instrumentation-only loop, cycles.
    pub instrumentation: CycleRange,
}

impl Default for DeriveSpec {
    fn default() -> Self {
        DeriveSpec {
            profile_iterations: 100_000,
            segments: 1,
            guards: GuardMargins::default(),
            instrumentation: CycleRange::new(260, 270),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FsmSource {
    Explicit(FsmConfig),
    Derived(DeriveSpec),
}

impl Default for FsmSource {
    fn default() -> Self {
        FsmSource::Derived(DeriveSpec::default())
    }
}

fn default_period() -> SimDuration {
    SimDuration::from_millis(20)
}

fn default_idle_interval() -> SimDuration {
    SimDuration::from_micros(100)
}

fn default_tick_offset() -> SimDuration {
    SimDuration::from_millis(1)
}

fn default_horizon() -> SimDuration {
    SimDuration::from_millis(2_000)
}

fn complex_gains() -> ControllerGains {
    ControllerGains::COMPLEX
}

fn safety_gains() -> ControllerGains {
    ControllerGains::SAFETY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "horizon_ns", default = "default_horizon")]
    pub horizon: SimDuration,
    #[serde(default)]
    pub mode: MonitorMode,
    #[serde(default)]
    pub plant: PlantParams,
    #[serde(default)]
    pub envelope: SafetyEnvelope,
    #[serde(default)]
    pub initial_state: PlantState,
    #[serde(default)]
    pub quantization: Option<Quantization>,
    #[serde(rename = "period_ns", default = "default_period")]
    pub period: SimDuration,
    /// Delay from a nominal release to the decision module's actuation tick.
    #[serde(rename = "tick_offset_ns", default = "default_tick_offset")]
    pub tick_offset: SimDuration,
    #[serde(default = "complex_gains")]
    pub complex_gains: ControllerGains,
    #[serde(default = "safety_gains")]
    pub safety_gains: ControllerGains,
    #[serde(default)]
    pub cpu: CpuModel,
    #[serde(default)]
    pub exec: ExecTimeDistribution,
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(rename = "idle_interval_ns", default = "default_idle_interval")]
    pub idle_interval: SimDuration,
    #[serde(default)]
    pub fsm: FsmSource,
    /// First iteration whose messages reach the monitor. Defaults to the
    /// cold-start count so warm-up jobs are not judged.
    #[serde(default)]
    pub arm_after_iterations: Option<u64>,
    #[serde(default)]
    pub attack: AttackSpec,
    #[serde(rename = "operator_resets_ns", default)]
    pub operator_resets: Vec<SimTime>,
    #[serde(default)]
    pub event_detail: EventDetail,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: String::new(),
            seed: 0,
            horizon: default_horizon(),
            mode: MonitorMode::default(),
            plant: PlantParams::default(),
            envelope: SafetyEnvelope::default(),
            initial_state: PlantState::default(),
            quantization: None,
            period: default_period(),
            tick_offset: default_tick_offset(),
            complex_gains: ControllerGains::COMPLEX,
            safety_gains: ControllerGains::SAFETY,
            cpu: CpuModel::default(),
            exec: ExecTimeDistribution::default(),
            channel: ChannelModel::default(),
            idle_interval: default_idle_interval(),
            fsm: FsmSource::default(),
            arm_after_iterations: None,
            attack: AttackSpec::none(),
            operator_resets: Vec::new(),
            event_detail: EventDetail::default(),
        }
    }
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::invalid(if path == "." { String::new() } else { path }, e.into_inner())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        let scenario: Scenario = serde_path_to_error::deserialize(value)
            .map_err(|e| ConfigError::invalid(e.path().to_string(), e.into_inner()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn complex_task(&self) -> ControlTaskConfig {
        ControlTaskConfig { period: self.period, gains: self.complex_gains, role: Role::Complex }
    }

    pub fn safety_task(&self) -> ControlTaskConfig {
        ControlTaskConfig { period: self.period, gains: self.safety_gains, role: Role::Safety }
    }

    pub fn arm_after(&self) -> u64 {
        self.arm_after_iterations.unwrap_or(self.exec.cold_start_iterations)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon == SimDuration::ZERO {
            return Err(ConfigError::invalid("horizon_ns", "must be positive"));
        }
        if self.period == SimDuration::ZERO {
            return Err(ConfigError::invalid("period_ns", "must be positive"));
        }
        if self.tick_offset >= self.period {
            return Err(ConfigError::invalid("tick_offset_ns", "must be shorter than the period"));
        }
        if self.idle_interval == SimDuration::ZERO {
            return Err(ConfigError::invalid("idle_interval_ns", "must be positive"));
        }
        self.plant.validate().map_err(|e| ConfigError::invalid(format!("plant.{}", e.0), "out of range"))?;
        self.envelope
            .validate(&self.plant)
            .map_err(|e| ConfigError::invalid(format!("envelope.{}", e.0), "out of range or outside the track"))?;
        if !self.initial_state.is_finite() {
            return Err(ConfigError::invalid("initial_state", "must be finite"));
        }
        if let Some(q) = &self.quantization {
            if !(q.x_step >= 0.0 && q.theta_step >= 0.0) {
                return Err(ConfigError::invalid("quantization", "steps must be non-negative"));
            }
        }
        if !self.complex_gains.is_finite() {
            return Err(ConfigError::invalid("complex_gains", "must be finite"));
        }
        if !self.safety_gains.is_finite() {
            return Err(ConfigError::invalid("safety_gains", "must be finite"));
        }
        if self.cpu.frequency_hz == 0 {
            return Err(ConfigError::invalid("cpu.frequency_hz", "must be positive"));
        }
        self.exec.validate().map_err(|e| ConfigError::invalid("exec", e))?;
        match &self.fsm {
            FsmSource::Explicit(cfg) => cfg.validate().map_err(|e| ConfigError::invalid("fsm.explicit", e))?,
            FsmSource::Derived(d) => {
                if d.segments == 0 {
                    return Err(ConfigError::invalid("fsm.derived.segments", "must be at least one"));
                }
                if d.profile_iterations == 0 {
                    return Err(ConfigError::invalid("fsm.derived.profile_iterations", "must be at least one"));
                }
                if d.instrumentation.lo > d.instrumentation.hi {
                    return Err(ConfigError::invalid("fsm.derived.instrumentation", "lo exceeds hi"));
                }
            }
        }
        self.attack.validate().map_err(|e| match e {
            AttackError::InvalidParameter(name) => ConfigError::invalid(format!("attack.kind.{name}"), "out of range"),
            other => ConfigError::invalid("attack", other),
        })?;
        if !matches!(self.attack.kind, AttackKind::None) && self.attack.start_time > SimTime::ZERO + self.horizon {
            return Err(ConfigError::invalid("attack.start_time_ns", "beyond the horizon"));
        }
        if let AttackKind::Replay { window_periods, .. } = self.attack.kind {
            let needed = self.period.as_nanos() * (u64::from(window_periods) + self.arm_after());
            if self.attack.start_time.as_nanos() < needed {
                return Err(ConfigError::invalid(
                    "attack.start_time_ns",
                    "replay needs a recorded window of armed periods before the attack",
                ));
            }
        }
        Ok(())
    }

    /// Monitored segments per job.
    pub fn segments(&self) -> usize {
        match &self.fsm {
            FsmSource::Explicit(cfg) => cfg.segments(),
            FsmSource::Derived(d) => d.segments,
        }
    }
}
