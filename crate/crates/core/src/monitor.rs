//! Trusted timing-model monitor.
//!
//! A value-state machine driven by timing-message arrivals and timer
//! expiries. Control jobs are tracked through `C1` (minimum execution time
//! not yet elapsed) and `C2` (inside the permitted jitter), the idle task
//! through `I1`/`I2` with the same split between heartbeats, and a period
//! clock that runs from one `StartControl` arrival to the next.
//!
//! Every window is half-open, `[MustWait, MustWait + CanWait)`, measured
//! from the arrival that armed it. A timer due at `t` fires before a message
//! arriving at `t`, so the machine gives the same answer whichever order the
//! caller delivers simultaneous inputs in. Any message without a transition
//! from the current location trips the monitor; `Tripped` is absorbing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::side_channel::MessageKind;
use crate::time::{SimDuration, SimTime};

/// A `MustWait`/`CanWait` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    #[serde(rename = "must_wait_ns")]
    pub must_wait: SimDuration,
    #[serde(rename = "can_wait_ns")]
    pub can_wait: SimDuration,
}

impl Window {
    pub const fn new(must_wait: SimDuration, can_wait: SimDuration) -> Self {
        Window { must_wait, can_wait }
    }

    /// Exclusive upper end of the accepted elapsed time.
    pub fn max(&self) -> SimDuration {
        self.must_wait + self.can_wait
    }

    pub fn accepts(&self, elapsed: SimDuration) -> bool {
        elapsed >= self.must_wait && elapsed < self.max()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FsmConfigError {
    #[error("at least one control segment is required")]
    NoControlSegments,
    #[error("period window ({period_ns} ns) cannot contain one control job ({job_ns} ns)")]
    PeriodShorterThanJob { period_ns: u64, job_ns: u64 },
}

/// The six monitor parameters. The control window may be split into a chain
/// of segments separated by `Checkpoint` messages; with one segment this is
/// exactly `MustWait_C`/`CanWait_C`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsmConfig {
    control: Vec<Window>,
    idle: Window,
    period: Window,
}

impl FsmConfig {
    pub fn new(control: Window, idle: Window, period: Window) -> Self {
        FsmConfig { control: vec![control], idle, period }
    }

    pub fn with_segments(control: Vec<Window>, idle: Window, period: Window) -> Self {
        FsmConfig { control, idle, period }
    }

    /// Runtime values reported for the inverted-pendulum prototype: an
    /// enforced iteration time of 4.6 to 5.7 µs and a 20 ms period. The idle
    /// window assumes a 100 µs heartbeat.
    pub fn reported_prototype() -> Self {
        FsmConfig::new(
            Window::new(SimDuration::from_nanos(4_600), SimDuration::from_nanos(1_100)),
            Window::new(SimDuration::from_micros(99), SimDuration::from_micros(2)),
            Window::new(SimDuration::from_nanos(19_995_000), SimDuration::from_micros(10)),
        )
    }

    pub fn validate(&self) -> Result<(), FsmConfigError> {
        if self.control.is_empty() {
            return Err(FsmConfigError::NoControlSegments);
        }
        let job: SimDuration = self.control.iter().fold(SimDuration::ZERO, |acc, w| acc + w.max());
        if self.period.max() < job {
            return Err(FsmConfigError::PeriodShorterThanJob {
                period_ns: self.period.max().as_nanos(),
                job_ns: job.as_nanos(),
            });
        }
        Ok(())
    }

    pub fn segments(&self) -> usize {
        self.control.len()
    }

    pub fn segment(&self, index: usize) -> &Window {
        &self.control[index]
    }

    pub fn control(&self) -> &[Window] {
        &self.control
    }

    pub fn idle(&self) -> &Window {
        &self.idle
    }

    pub fn period(&self) -> &Window {
        &self.period
    }

    pub fn must_wait_c(&self) -> SimDuration {
        self.control[0].must_wait
    }

    pub fn can_wait_c(&self) -> SimDuration {
        self.control[0].can_wait
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Init,
    C1,
    C2,
    I1,
    I2,
    Tripped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    Control,
    Idle,
    Period,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Nominal,
    ExecTooLong,
    ExecTooShort,
    PeriodTooLong,
    PeriodTooShort,
    IdleSilence,
    IdleTooEarly,
    UnexpectedMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    #[serde(rename = "time_ns")]
    pub time: SimTime,
}

impl Verdict {
    pub fn nominal(time: SimTime) -> Self {
        Verdict { kind: VerdictKind::Nominal, time }
    }

    pub fn is_violation(&self) -> bool {
        self.kind != VerdictKind::Nominal
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FsmError {
    #[error("input at {at} precedes the last processed input at {last}")]
    OutOfOrder { at: SimTime, last: SimTime },
    #[error("{0:?} timer is not armed")]
    TimerNotArmed(Clock),
    #[error("{clock:?} timer is due at {due}, not {now}")]
    TimerNotDue { clock: Clock, due: SimTime, now: SimTime },
}

/// Live monitor state. Deadlines are absolute times; `None` means disarmed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorState {
    pub location: Location,
    /// Index of the control segment being timed.
    pub segment: usize,
    pub clk_c: Option<SimTime>,
    pub clk_i: Option<SimTime>,
    /// Earliest arrival accepted for the next `StartControl`.
    pub period_open: Option<SimTime>,
    /// Deadline for the next `StartControl`.
    pub clk_p: Option<SimTime>,
    /// Idle location preempted by the running control job.
    pub state_i: Option<Location>,
    pub verdict: Verdict,
    pub last_time: SimTime,
}

impl Default for MonitorState {
    fn default() -> Self {
        Self::new()
    }
}

impl MonitorState {
    pub fn new() -> Self {
        MonitorState {
            location: Location::Init,
            segment: 0,
            clk_c: None,
            clk_i: None,
            period_open: None,
            clk_p: None,
            state_i: None,
            verdict: Verdict::nominal(SimTime::ZERO),
            last_time: SimTime::ZERO,
        }
    }

    pub fn is_tripped(&self) -> bool {
        self.location == Location::Tripped
    }

    pub fn armed(&self, clock: Clock) -> Option<SimTime> {
        match clock {
            Clock::Control => self.clk_c,
            Clock::Idle => self.clk_i,
            Clock::Period => self.clk_p,
        }
    }

    /// Earliest armed deadline. Ties resolve control, idle, period.
    pub fn next_timer(&self) -> Option<(Clock, SimTime)> {
        [Clock::Control, Clock::Idle, Clock::Period]
            .into_iter()
            .filter_map(|c| self.armed(c).map(|t| (c, t)))
            .min_by_key(|&(_, t)| t)
    }

    pub fn on_timer(mut self, clock: Clock, now: SimTime, cfg: &FsmConfig) -> Result<(Self, Verdict), FsmError> {
        let due = self.armed(clock).ok_or(FsmError::TimerNotArmed(clock))?;
        if due != now {
            return Err(FsmError::TimerNotDue { clock, due, now });
        }
        if now < self.last_time {
            return Err(FsmError::OutOfOrder { at: now, last: self.last_time });
        }
        self.last_time = now;
        self.fire(clock, now, cfg);
        Ok((self, self.outcome(now)))
    }

    pub fn on_message(
        mut self,
        kind: MessageKind,
        arrival: SimTime,
        cfg: &FsmConfig,
    ) -> Result<(Self, Verdict), FsmError> {
        if arrival < self.last_time {
            return Err(FsmError::OutOfOrder { at: arrival, last: self.last_time });
        }
        self.last_time = arrival;
        self.advance_to(arrival, cfg);
        if self.is_tripped() {
            return Ok((self, self.verdict));
        }
        use Location::*;
        use MessageKind::*;
        match (self.location, kind) {
            (Init, StartControl) => self.start_job(arrival, cfg),
            (C1, Checkpoint | EndControl) => self.trip(VerdictKind::ExecTooShort, arrival),
            (C2, Checkpoint) if self.segment + 1 < cfg.segments() => {
                self.segment += 1;
                self.location = C1;
                self.clk_c = Some(arrival + cfg.segment(self.segment).must_wait);
            }
            (C2, EndControl) if self.segment + 1 == cfg.segments() => {
                self.location = I1;
                self.clk_c = None;
                self.state_i = None;
                self.clk_i = Some(arrival + cfg.idle().must_wait);
            }
            (I1, IdleHeartbeat) => self.trip(VerdictKind::IdleTooEarly, arrival),
            (I2, IdleHeartbeat) => {
                self.location = I1;
                self.clk_i = Some(arrival + cfg.idle().must_wait);
            }
            (I1 | I2, StartControl) => match self.period_open {
                Some(open) if arrival < open => self.trip(VerdictKind::PeriodTooShort, arrival),
                _ => {
                    self.state_i = Some(self.location);
                    self.start_job(arrival, cfg);
                }
            },
            _ => self.trip(VerdictKind::UnexpectedMessage, arrival),
        }
        Ok((self, self.outcome(arrival)))
    }

    fn outcome(&self, now: SimTime) -> Verdict {
        if self.is_tripped() {
            self.verdict
        } else {
            Verdict::nominal(now)
        }
    }

    /// Fires every timer due at or before `t`, earliest first.
    fn advance_to(&mut self, t: SimTime, cfg: &FsmConfig) {
        while let Some((clock, due)) = self.next_timer() {
            if due > t || self.is_tripped() {
                break;
            }
            self.fire(clock, due, cfg);
        }
    }

    fn fire(&mut self, clock: Clock, now: SimTime, cfg: &FsmConfig) {
        match (clock, self.location) {
            (Clock::Control, Location::C1) => {
                self.location = Location::C2;
                self.clk_c = Some(now + cfg.segment(self.segment).can_wait);
            }
            (Clock::Control, _) => self.trip(VerdictKind::ExecTooLong, now),
            (Clock::Idle, Location::I1) => {
                self.location = Location::I2;
                self.clk_i = Some(now + cfg.idle().can_wait);
            }
            (Clock::Idle, _) => self.trip(VerdictKind::IdleSilence, now),
            (Clock::Period, _) => self.trip(VerdictKind::PeriodTooLong, now),
        }
    }

    fn start_job(&mut self, arrival: SimTime, cfg: &FsmConfig) {
        self.location = Location::C1;
        self.segment = 0;
        self.clk_i = None;
        self.clk_c = Some(arrival + cfg.segment(0).must_wait);
        self.period_open = Some(arrival + cfg.period().must_wait);
        self.clk_p = Some(arrival + cfg.period().max());
    }

    fn trip(&mut self, kind: VerdictKind, at: SimTime) {
        self.location = Location::Tripped;
        self.clk_c = None;
        self.clk_i = None;
        self.clk_p = None;
        self.period_open = None;
        self.verdict = Verdict { kind, time: at };
    }
}

/// Longest time a control job can run without its next timing message
/// before the monitor trips.
pub fn worst_case_detection_latency(cfg: &FsmConfig) -> SimDuration {
    cfg.control().iter().map(Window::max).max().unwrap_or(SimDuration::ZERO)
}
