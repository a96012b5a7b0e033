//! Execution-time model of the untrusted control task and the dual-loop
//! profiling procedure that turns cycle traces into an [`ExecutionProfile`].
//!
//! The generative model is banded: most steady iterations land in a lower
//! sub-band, a fraction are pushed up by a cache-eviction extra into the top
//! of the steady band, rare bus-contention spikes add more on top, and the
//! first few iterations run cold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::RngStream;
use crate::monitor::{FsmConfig, Window};
use crate::time::SimDuration;

/// Clock frequency and per-message issue cost of the virtual CPU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpuModel {
    pub frequency_hz: u64,
    pub message_overhead_cycles: u64,
}

impl Default for CpuModel {
    fn default() -> Self {
        CpuModel { frequency_hz: 2_670_000_000, message_overhead_cycles: 130 }
    }
}

impl CpuModel {
    /// `round(cycles * 1e9 / frequency)` nanoseconds, computed in integers.
    pub fn cycles_to_time(&self, cycles: u64) -> SimDuration {
        let f = self.frequency_hz as u128;
        let ns = (cycles as u128 * 1_000_000_000 + f / 2) / f;
        SimDuration(ns as u64)
    }

    pub fn message_overhead(&self) -> SimDuration {
        self.cycles_to_time(self.message_overhead_cycles)
    }
}

/// Inclusive range of cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRange {
    pub lo: u64,
    pub hi: u64,
}

impl CycleRange {
    pub const fn new(lo: u64, hi: u64) -> Self {
        CycleRange { lo, hi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecTimeDistribution {
    pub steady_low: u64,
    pub steady_high: u64,
    pub cold_start_iterations: u64,
    pub cold_start_worst: u64,
    pub upper_band_probability: f64,
    pub upper_band_extra: CycleRange,
    pub spike_probability: f64,
    pub spike_extra: CycleRange,
}

impl Default for ExecTimeDistribution {
    fn default() -> Self {
        ExecTimeDistribution {
            steady_low: 13_070,
            steady_high: 14_660,
            cold_start_iterations: 5,
            cold_start_worst: 16_560,
            upper_band_probability: 0.1,
            upper_band_extra: CycleRange::new(500, 900),
            spike_probability: 0.0,
            spike_extra: CycleRange::new(2_000, 6_000),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("steady band is inverted: low {low} > high {high}")]
    InvertedBand { low: u64, high: u64 },
    #[error("{field} must be positive")]
    NonPositive { field: &'static str },
    #[error("{field} = {value} is not a probability")]
    BadProbability { field: &'static str, value: f64 },
    #[error("{field} range is inverted")]
    InvertedRange { field: &'static str },
}

impl ExecTimeDistribution {
    pub fn validate(&self) -> Result<(), DistributionError> {
        if self.steady_low > self.steady_high {
            return Err(DistributionError::InvertedBand { low: self.steady_low, high: self.steady_high });
        }
        if self.steady_low == 0 {
            return Err(DistributionError::NonPositive { field: "steady_low" });
        }
        if self.cold_start_worst == 0 {
            return Err(DistributionError::NonPositive { field: "cold_start_worst" });
        }
        for (field, value) in [
            ("upper_band_probability", self.upper_band_probability),
            ("spike_probability", self.spike_probability),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(DistributionError::BadProbability { field, value });
            }
        }
        if self.upper_band_extra.lo > self.upper_band_extra.hi {
            return Err(DistributionError::InvertedRange { field: "upper_band_extra" });
        }
        if self.spike_extra.lo > self.spike_extra.hi {
            return Err(DistributionError::InvertedRange { field: "spike_extra" });
        }
        Ok(())
    }

    /// Top of the lower sub-band. Upper-band iterations add at most
    /// `upper_band_extra.hi` on top of it, so they never leave the steady band.
    pub fn lower_band_top(&self) -> u64 {
        self.steady_high.saturating_sub(self.upper_band_extra.hi).max(self.steady_low)
    }

    /// Cycles for iteration `iteration` of the control task.
    pub fn draw(&self, iteration: u64, rng: &mut RngStream) -> u64 {
        if iteration < self.cold_start_iterations {
            let worst = self.cold_start_worst.max(self.steady_high);
            return rng.uniform_inclusive(self.steady_high, worst);
        }
        let mut cycles = rng.uniform_inclusive(self.steady_low, self.lower_band_top());
        if rng.chance(self.upper_band_probability) {
            cycles += rng.uniform_inclusive(self.upper_band_extra.lo, self.upper_band_extra.hi);
        }
        if rng.chance(self.spike_probability) {
            cycles += rng.uniform_inclusive(self.spike_extra.lo, self.spike_extra.hi);
        }
        cycles
    }
}

/// Free-function form of [`ExecTimeDistribution::draw`].
pub fn draw_exec_time(iteration: u64, dist: &ExecTimeDistribution, rng: &mut RngStream) -> u64 {
    dist.draw(iteration, rng)
}

/// Measured timing envelope of the control task, in cycles with the
/// instrumentation overhead already removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionProfile {
    pub best: u64,
    pub worst: u64,
    pub steady_low: u64,
    pub steady_high: u64,
    pub instrumentation_overhead: u64,
}

impl ExecutionProfile {
    pub fn steady_width(&self) -> u64 {
        self.steady_high - self.steady_low
    }

    pub fn is_ordered(&self) -> bool {
        self.best <= self.steady_low && self.steady_low <= self.steady_high && self.steady_high <= self.worst
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("{0} trace is empty")]
    EmptyTrace(&'static str),
    #[error("steady window of {window} exceeds trace length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("steady window must be at least one iteration")]
    EmptyWindow,
}

/// Steady window covering the last 90% of a trace of `len` iterations.
pub fn default_steady_window(len: usize) -> usize {
    (len * 9 / 10).max(1).min(len)
}

fn median(values: &[u64]) -> u64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2
    }
}

/// Dual-loop profile: subtract the median cost of the instrumentation-only
/// loop from every timed iteration, then take extremes overall and over the
/// trailing `steady_window` iterations.
pub fn dual_loop_profile(
    timed: &[u64],
    instrumentation: &[u64],
    steady_window: usize,
) -> Result<ExecutionProfile, ProfileError> {
    if timed.is_empty() {
        return Err(ProfileError::EmptyTrace("timed"));
    }
    if instrumentation.is_empty() {
        return Err(ProfileError::EmptyTrace("instrumentation"));
    }
    if steady_window == 0 {
        return Err(ProfileError::EmptyWindow);
    }
    if steady_window > timed.len() {
        return Err(ProfileError::WindowTooLong { window: steady_window, len: timed.len() });
    }
    let overhead = median(instrumentation);
    let corrected = timed.iter().map(|&raw| raw.saturating_sub(overhead));
    let (mut best, mut worst) = (u64::MAX, 0);
    let (mut steady_low, mut steady_high) = (u64::MAX, 0);
    let steady_start = timed.len() - steady_window;
    for (i, c) in corrected.enumerate() {
        best = best.min(c);
        worst = worst.max(c);
        if i >= steady_start {
            steady_low = steady_low.min(c);
            steady_high = steady_high.max(c);
        }
    }
    Ok(ExecutionProfile { best, worst, steady_low, steady_high, instrumentation_overhead: overhead })
}

/// Margins added around the measured windows when deriving monitor
/// parameters. All of them widen the accepted window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardMargins {
    #[serde(rename = "lower_ns")]
    pub lower: SimDuration,
    #[serde(rename = "upper_ns")]
    pub upper: SimDuration,
    #[serde(rename = "period_ns")]
    pub period: SimDuration,
    #[serde(rename = "idle_ns")]
    pub idle: SimDuration,
}

impl Default for GuardMargins {
    fn default() -> Self {
        GuardMargins {
            lower: SimDuration::from_nanos(200),
            upper: SimDuration::from_nanos(300),
            period: SimDuration::from_micros(5),
            idle: SimDuration::from_micros(1),
        }
    }
}

/// Everything besides the profile that shapes the monitor windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeriveInputs {
    /// Per-message delay jitter bound of the side channel.
    pub jitter: SimDuration,
    /// CPU time spent issuing each timing message.
    pub sender_overhead: SimDuration,
    pub guards: GuardMargins,
    pub period: SimDuration,
    pub idle_interval: SimDuration,
    /// Number of monitored segments per control job (1 = start/end only).
    pub segments: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DeriveError {
    #[error("derived MustWait for {phase} is not positive ({value_ns} ns)")]
    NonPositiveMustWait { phase: &'static str, value_ns: i64 },
    #[error("profile is not ordered (best <= steady low <= steady high <= worst)")]
    UnorderedProfile,
    #[error("segment count must be at least one")]
    NoSegments,
    #[error(transparent)]
    InvalidConfig(#[from] crate::monitor::FsmConfigError),
}

fn window(phase: &'static str, min_ns: i64, max_ns: i64) -> Result<Window, DeriveError> {
    if min_ns <= 0 {
        return Err(DeriveError::NonPositiveMustWait { phase, value_ns: min_ns });
    }
    Ok(Window::new(SimDuration(min_ns as u64), SimDuration((max_ns - min_ns) as u64)))
}

/// Monitor windows from a measured profile.
///
/// Each window is anchored at a message arrival and closed by the next one,
/// so both ends move by up to one jitter bound in opposite directions:
///
/// ```text
/// MustWait = nominal_min + overhead - jitter - lower_guard
/// MustWait + CanWait = nominal_max + overhead + jitter + upper_guard
/// ```
///
/// With `segments > 1` each control segment gets `1/segments` of the steady
/// band.
pub fn derive_fsm_params(
    profile: &ExecutionProfile,
    cpu: &CpuModel,
    inputs: &DeriveInputs,
) -> Result<FsmConfig, DeriveError> {
    if !profile.is_ordered() {
        return Err(DeriveError::UnorderedProfile);
    }
    if inputs.segments == 0 {
        return Err(DeriveError::NoSegments);
    }
    let n = inputs.segments as i64;
    let jitter = inputs.jitter.as_nanos() as i64;
    let overhead = inputs.sender_overhead.as_nanos() as i64;
    let g = &inputs.guards;
    let low = cpu.cycles_to_time(profile.steady_low).as_nanos() as i64;
    let high = cpu.cycles_to_time(profile.steady_high).as_nanos() as i64;
    // segment lengths are floor/ceil of the job split
    let seg_low = low / n;
    let seg_high = (high + n - 1) / n;
    let control = window(
        "control",
        seg_low + overhead - jitter - g.lower.as_nanos() as i64,
        seg_high + overhead + jitter + g.upper.as_nanos() as i64,
    )?;
    let period = inputs.period.as_nanos() as i64;
    let period_slack = jitter + g.period.as_nanos() as i64;
    let period_w = window("period", period - period_slack, period + period_slack)?;
    let idle = inputs.idle_interval.as_nanos() as i64;
    let idle_slack = jitter + g.idle.as_nanos() as i64;
    let idle_w = window("idle", idle - idle_slack, idle + idle_slack)?;
    let cfg = FsmConfig::with_segments(vec![control; inputs.segments], idle_w, period_w);
    cfg.validate()?;
    Ok(cfg)
}
