//! End-to-end wiring: CPU task, side channel, monitor, FPGA decision module
//! and plant on one event queue.
//!
//! Timeline of one period, release `r`:
//!
//! * `r`: the control job samples the sensors, computes its command and
//!   sends `StartControl`. Its segments follow, each closed by a
//!   `Checkpoint` or the final `EndControl`; the command is written to the
//!   shared actuation register together with `EndControl`.
//! * After `EndControl` the idle task sends a heartbeat every idle interval
//!   until the next release.
//! * `k * period + tick_offset`: the decision module samples the plant, runs
//!   the safety controller and picks the command to apply.
//!
//! A monitor trip in S3A mode switches to the safety controller at the trip
//! instant instead of waiting for the next tick.

use std::collections::VecDeque;

use thiserror::Error;

use crate::attack::{
    apply_destabilize, apply_idle_silence, apply_overrun, apply_period_drift, apply_replay, apply_undertime,
    stretch_first_job, AttackError, AttackKind,
};
use crate::controllers::{complex_control, safety_control, ControlTaskConfig};
use crate::decision::{decide, operator_reset, Cause, Controller, Mode};
use crate::kernel::{EventHandle, Kernel, RngStream};
use crate::monitor::{Clock, FsmConfig, MonitorState, Verdict, VerdictKind};
use crate::plant::{is_destroyed, is_safe, read_sensors, step_dynamics, ActuationCmd, PlantState, SensorReading, SUBSTEP};
use crate::side_channel::{MessageKind, Origin, SideChannel, TimingMessage};
use crate::time::{SimDuration, SimTime};

use super::profile::resolve_fsm;
use super::report::{EventRecord, ModeSwitch, RunOutput, RunReport, TraceRow};
use super::scenario::{ConfigError, EventDetail, MonitorMode, Scenario};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

#[derive(Debug, Clone, PartialEq)]
enum Ev {
    Release { iteration: u64 },
    Send { kind: MessageKind, origin: Origin, job_end: bool },
    Heartbeat,
    Arrival(TimingMessage),
    Timer(Clock),
    Tick,
    PlantStep,
    ReplayWindow,
    OperatorReset,
    AttackStart,
}

const CLOCKS: [Clock; 3] = [Clock::Control, Clock::Idle, Clock::Period];

fn clock_index(c: Clock) -> usize {
    match c {
        Clock::Control => 0,
        Clock::Idle => 1,
        Clock::Period => 2,
    }
}

/// Cycles of segment `i` when `total` is split into `n` near-equal parts.
fn segment_cycles(total: u64, n: u64, i: u64) -> u64 {
    total * (i + 1) / n - total * i / n
}

struct Sim<'a> {
    s: &'a Scenario,
    cfg: FsmConfig,
    complex_task: ControlTaskConfig,
    safety_task: ControlTaskConfig,
    channel: SideChannel,
    exec_rng: RngStream,

    plant: PlantState,
    plant_time: SimTime,
    voltage: f64,
    mode: Mode,

    monitor: MonitorState,
    timers: [Option<(SimTime, EventHandle)>; 3],
    armed_from: Option<SimTime>,
    rearm_at_next_release: bool,

    prev_task_sample: Option<SensorReading>,
    pending_cmd: ActuationCmd,
    shared_cmd: ActuationCmd,
    next_release: SimTime,
    prev_tick_sample: Option<SensorReading>,
    safety_cmd: Option<ActuationCmd>,

    history: VecDeque<TimingMessage>,
    recording: Vec<TimingMessage>,
    replay_started: bool,
    replay_first_window: bool,
    silence_logged: bool,
    error: Option<RunError>,

    iterations: u64,
    jobs_completed: u64,
    first_infected_release: Option<SimTime>,
    first_infected_start_arrival: Option<SimTime>,
    first_violation: Option<Verdict>,
    violations: u64,
    first_unsafe: Option<SimTime>,
    destroyed_at: Option<SimTime>,
    switches: Vec<ModeSwitch>,
    max_malicious_exec: Option<u64>,
    max_exec: u64,
    messages_sent: u64,
    messages_delivered: u64,
    messages_injected: u64,
    control_send_overhead: u64,
    /// Overhead of the running job, booked when it completes.
    job_send_overhead: u64,
    trace: Vec<TraceRow>,
    events: Vec<EventRecord>,
}

impl<'a> Sim<'a> {
    fn new(s: &'a Scenario, cfg: FsmConfig) -> Self {
        Sim {
            s,
            cfg,
            complex_task: s.complex_task(),
            safety_task: s.safety_task(),
            channel: SideChannel::new(s.channel, RngStream::new(s.seed, "channel")),
            exec_rng: RngStream::new(s.seed, "exec"),
            plant: s.initial_state,
            plant_time: SimTime::ZERO,
            voltage: 0.0,
            mode: Mode::complex(),
            monitor: MonitorState::new(),
            timers: [None; 3],
            armed_from: None,
            rearm_at_next_release: false,
            prev_task_sample: None,
            pending_cmd: ActuationCmd::default(),
            shared_cmd: ActuationCmd::default(),
            next_release: SimTime::ZERO,
            prev_tick_sample: None,
            safety_cmd: None,
            history: VecDeque::new(),
            recording: Vec::new(),
            replay_started: false,
            replay_first_window: true,
            silence_logged: false,
            error: None,
            iterations: 0,
            jobs_completed: 0,
            first_infected_release: None,
            first_infected_start_arrival: None,
            first_violation: None,
            violations: 0,
            first_unsafe: None,
            destroyed_at: None,
            switches: Vec::new(),
            max_malicious_exec: None,
            max_exec: 0,
            messages_sent: 0,
            messages_delivered: 0,
            messages_injected: 0,
            control_send_overhead: 0,
            job_send_overhead: 0,
            trace: Vec::new(),
            events: Vec::new(),
        }
    }

    fn full_log(&self) -> bool {
        self.s.event_detail == EventDetail::Full
    }

    fn log_attack(&mut self, t: SimTime, action: &str, iteration: Option<u64>) {
        self.events.push(EventRecord::Attack { t_ns: t, action: action.to_owned(), iteration });
    }

    fn sensors(&self) -> SensorReading {
        read_sensors(&self.plant, self.s.quantization.as_ref())
    }

    fn advance_plant(&mut self, to: SimTime) {
        if to > self.plant_time {
            let dt = to - self.plant_time;
            self.plant = step_dynamics(&self.plant, ActuationCmd::new(self.voltage), dt, &self.s.plant);
            self.plant_time = to;
        }
    }

    fn push_trace(&mut self, t: SimTime) {
        let p = self.plant;
        self.trace.push(TraceRow {
            t_ns: t.as_nanos(),
            x: p.x,
            x_dot: p.x_dot,
            theta: p.theta,
            theta_dot: p.theta_dot,
            voltage: self.voltage,
            mode: self.mode.value,
        });
    }

    fn record_switch(&mut self, t: SimTime) {
        self.switches.push(ModeSwitch { time_ns: t, to: self.mode.value, cause: self.mode.cause });
        self.events.push(EventRecord::ModeSwitch { t_ns: t, to: self.mode.value, cause: self.mode.cause });
    }

    fn handle(&mut self, k: &mut Kernel<Ev>, ev: Ev) {
        let now = k.now();
        match ev {
            Ev::Release { iteration } => self.on_release(k, now, iteration),
            Ev::Send { kind, origin, job_end } => self.on_send(k, now, kind, origin, job_end),
            Ev::Heartbeat => self.on_heartbeat(k, now),
            Ev::Arrival(msg) => self.on_arrival(k, now, msg),
            Ev::Timer(clock) => self.on_timer(k, now, clock),
            Ev::Tick => self.on_tick(k, now),
            Ev::PlantStep => self.on_plant_step(k, now),
            Ev::ReplayWindow => self.replay_window(k, now),
            Ev::OperatorReset => self.on_reset(now),
            Ev::AttackStart => self.log_attack(now, "start", None),
        }
    }

    fn on_release(&mut self, k: &mut Kernel<Ev>, now: SimTime, iteration: u64) {
        self.iterations += 1;
        if iteration == self.s.arm_after() || self.rearm_at_next_release {
            self.armed_from = Some(now);
            self.rearm_at_next_release = false;
        }
        self.advance_plant(now);
        let sample = self.sensors();
        let prev = self.prev_task_sample.unwrap_or(sample);
        let mut cmd = complex_control(&self.complex_task, &sample, &prev, self.s.plant.voltage_limit);
        self.prev_task_sample = Some(sample);

        let attack = self.s.attack;
        let infected = attack.is_active_at(now);
        let mut cycles = self.s.exec.draw(iteration, &mut self.exec_rng);
        let limit = self.s.plant.voltage_limit;
        let mut job_infected = false;
        if infected {
            match attack.kind {
                AttackKind::Overrun { loop_bound, per_iteration_cycles } => {
                    cycles = apply_overrun(cycles, loop_bound, per_iteration_cycles);
                    job_infected = true;
                }
                AttackKind::Undertime { factor } => {
                    cycles = apply_undertime(cycles, factor);
                    job_infected = true;
                }
                AttackKind::Destabilize { loop_bound, per_iteration_cycles } => {
                    cycles = apply_overrun(cycles, loop_bound, per_iteration_cycles);
                    cmd = apply_destabilize(sample.theta, limit);
                    job_infected = true;
                }
                AttackKind::Replay { destabilize, overrun_bound, per_iteration_cycles, .. } => {
                    cycles = apply_overrun(cycles, overrun_bound, per_iteration_cycles);
                    if destabilize {
                        cmd = apply_destabilize(sample.theta, limit);
                    }
                    job_infected = true;
                }
                AttackKind::PeriodDrift { .. } | AttackKind::IdleSilence | AttackKind::None => {}
            }
        }
        self.pending_cmd = cmd;

        // next release
        let nominal = now + self.s.period;
        self.next_release = match attack.kind {
            AttackKind::PeriodDrift { drift_ns } if attack.is_active_at(nominal) => {
                let next = apply_period_drift(now, self.s.period, drift_ns);
                if self.first_infected_release.is_none() {
                    self.first_infected_release = Some(next);
                    self.log_attack(next, "period_drift", Some(iteration + 1));
                }
                next
            }
            _ => nominal,
        };
        k.schedule(self.next_release, Ev::Release { iteration: iteration + 1 }).expect("future release");

        if let AttackKind::Replay { .. } = attack.kind {
            if infected && !self.replay_started {
                self.start_replay(k, now);
            }
        }

        // job plan
        let n = self.cfg.segments() as u64;
        let overhead = self.s.channel.sender_overhead;
        let mut exec = SimDuration::ZERO;
        k.schedule(now, Ev::Send { kind: MessageKind::StartControl, origin: Origin::Legitimate, job_end: false })
            .expect("now");
        let mut cpu = now + overhead;
        for i in 0..n {
            let seg = self.s.cpu.cycles_to_time(segment_cycles(cycles, n, i));
            exec += seg;
            cpu += seg;
            let last = i + 1 == n;
            let kind = if last { MessageKind::EndControl } else { MessageKind::Checkpoint };
            k.schedule(cpu, Ev::Send { kind, origin: Origin::Legitimate, job_end: last }).expect("future send");
            cpu += overhead;
        }
        self.max_exec = self.max_exec.max(exec.as_nanos());
        if job_infected {
            self.max_malicious_exec = Some(self.max_malicious_exec.unwrap_or(0).max(exec.as_nanos()));
            if self.first_infected_release.is_none() {
                self.first_infected_release = Some(now);
                self.log_attack(now, "infected_release", Some(iteration));
            }
        }
    }

    fn delivered(&self, send_time: SimTime) -> bool {
        self.armed_from.is_some_and(|a| send_time >= a)
    }

    fn on_send(&mut self, k: &mut Kernel<Ev>, now: SimTime, kind: MessageKind, origin: Origin, job_end: bool) {
        let suppressed = origin == Origin::Legitimate && self.replay_started;
        if !suppressed {
            let (_, msg) = self.channel.send(kind, now, origin);
            self.messages_sent += 1;
            match origin {
                Origin::Legitimate => {
                    if kind != MessageKind::IdleHeartbeat {
                        self.job_send_overhead += self.s.channel.sender_overhead.as_nanos();
                    }
                    self.remember(msg);
                }
                Origin::Injected => self.messages_injected += 1,
            }
            if self.delivered(now) {
                k.schedule(msg.arrival_time, Ev::Arrival(msg)).expect("arrival after send");
            }
        }
        if job_end {
            self.shared_cmd = self.pending_cmd;
            self.jobs_completed += 1;
            self.control_send_overhead += std::mem::take(&mut self.job_send_overhead);
            self.schedule_heartbeat(k, now + self.s.idle_interval);
        }
    }

    fn remember(&mut self, msg: TimingMessage) {
        if let AttackKind::Replay { window_periods, .. } = self.s.attack.kind {
            let keep = self.s.period.as_nanos() * u64::from(window_periods);
            self.history.push_back(msg);
            while self.history.front().is_some_and(|m| m.send_time.as_nanos() + keep < msg.send_time.as_nanos()) {
                self.history.pop_front();
            }
        }
    }

    fn schedule_heartbeat(&mut self, k: &mut Kernel<Ev>, at: SimTime) {
        if at < self.next_release {
            k.schedule(at, Ev::Heartbeat).expect("future heartbeat");
        }
    }

    fn on_heartbeat(&mut self, k: &mut Kernel<Ev>, now: SimTime) {
        let attack = self.s.attack;
        let silenced = matches!(attack.kind, AttackKind::IdleSilence) && apply_idle_silence(now, attack.start_time).is_none();
        if silenced {
            if !self.silence_logged {
                self.silence_logged = true;
                self.log_attack(now, "heartbeat_suppressed", None);
            }
            return;
        }
        self.on_send(k, now, MessageKind::IdleHeartbeat, Origin::Legitimate, false);
        self.schedule_heartbeat(k, now + self.s.idle_interval);
    }

    fn start_replay(&mut self, k: &mut Kernel<Ev>, now: SimTime) {
        let AttackKind::Replay { window_periods, .. } = self.s.attack.kind else { return };
        let from = now.as_nanos().saturating_sub(self.s.period.as_nanos() * u64::from(window_periods));
        self.recording = self
            .history
            .iter()
            .filter(|m| m.send_time.as_nanos() >= from && m.send_time < now)
            .copied()
            .collect();
        self.replay_started = true;
        self.log_attack(now, "replay_start", None);
        self.replay_window(k, now);
    }

    fn replay_window(&mut self, k: &mut Kernel<Ev>, now: SimTime) {
        let AttackKind::Replay { window_periods, stretch_first_job_ns, .. } = self.s.attack.kind else { return };
        let mut sends = match apply_replay(&self.recording, now) {
            Ok(s) => s,
            Err(e) => {
                self.error = Some(e.into());
                k.stop();
                return;
            }
        };
        if self.replay_first_window && stretch_first_job_ns > 0 {
            stretch_first_job(&mut sends, SimDuration(stretch_first_job_ns));
        }
        self.replay_first_window = false;
        for send in sends {
            k.schedule(send.send_time, Ev::Send { kind: send.kind, origin: Origin::Injected, job_end: false })
                .expect("replayed sends are not in the past");
        }
        k.schedule(now + self.s.period * u64::from(window_periods), Ev::ReplayWindow).expect("future window");
    }

    fn on_arrival(&mut self, k: &mut Kernel<Ev>, now: SimTime, msg: TimingMessage) {
        self.messages_delivered += 1;
        if msg.kind == MessageKind::StartControl
            && self.first_infected_start_arrival.is_none()
            && self.first_infected_release.is_some_and(|r| msg.send_time >= r)
        {
            self.first_infected_start_arrival = Some(now);
        }
        let was_tripped = self.monitor.is_tripped();
        let (next, verdict) = self.monitor.on_message(msg.kind, now, &self.cfg).expect("arrivals are ordered");
        self.monitor = next;
        if self.full_log() {
            self.events.push(EventRecord::Message {
                t_ns: now,
                kind: msg.kind,
                origin: msg.origin,
                send_ns: msg.send_time,
                arrival_ns: msg.arrival_time,
                location: next.location,
            });
        }
        self.after_fsm_step(k, now, was_tripped, verdict);
    }

    fn on_timer(&mut self, k: &mut Kernel<Ev>, now: SimTime, clock: Clock) {
        self.timers[clock_index(clock)] = None;
        let was_tripped = self.monitor.is_tripped();
        let (next, verdict) = self.monitor.on_timer(clock, now, &self.cfg).expect("timer events mirror monitor deadlines");
        self.monitor = next;
        if self.full_log() {
            self.events.push(EventRecord::Timer { t_ns: now, clock, location: next.location });
        }
        self.after_fsm_step(k, now, was_tripped, verdict);
    }

    fn after_fsm_step(&mut self, k: &mut Kernel<Ev>, now: SimTime, was_tripped: bool, verdict: Verdict) {
        self.sync_timers(k);
        if !was_tripped && self.monitor.is_tripped() {
            self.on_trip(now, verdict);
        }
    }

    fn sync_timers(&mut self, k: &mut Kernel<Ev>) {
        for clock in CLOCKS {
            let i = clock_index(clock);
            let want = self.monitor.armed(clock);
            if self.timers[i].map(|(t, _)| t) == want {
                continue;
            }
            if let Some((_, handle)) = self.timers[i].take() {
                k.cancel(handle);
            }
            if let Some(t) = want {
                let handle = k.schedule(t, Ev::Timer(clock)).expect("monitor deadlines are not in the past");
                self.timers[i] = Some((t, handle));
            }
        }
    }

    fn on_trip(&mut self, now: SimTime, verdict: Verdict) {
        self.violations += 1;
        self.first_violation.get_or_insert(verdict);
        self.events.push(EventRecord::Verdict { t_ns: verdict.time, kind: verdict.kind, location: self.monitor.location });
        if self.s.mode == MonitorMode::S3a && !self.mode.is_safety() {
            self.advance_plant(now);
            let cmd = self.safety_cmd.unwrap_or_else(|| {
                let s = self.sensors();
                safety_control(&self.safety_task, &s, &s, self.s.plant.voltage_limit)
            });
            let (applied, mode) = decide(&self.plant, &self.s.envelope, &verdict, self.shared_cmd, cmd, self.mode, now);
            self.mode = mode;
            self.voltage = applied.voltage;
            self.record_switch(now);
            self.push_trace(now);
        }
    }

    fn on_tick(&mut self, k: &mut Kernel<Ev>, now: SimTime) {
        self.advance_plant(now);
        let sample = self.sensors();
        let prev = self.prev_tick_sample.unwrap_or(sample);
        let safety = safety_control(&self.safety_task, &sample, &prev, self.s.plant.voltage_limit);
        self.prev_tick_sample = Some(sample);
        self.safety_cmd = Some(safety);
        let verdict = match self.s.mode {
            MonitorMode::S3a if self.monitor.is_tripped() => self.monitor.verdict,
            _ => Verdict::nominal(now),
        };
        let before = self.mode;
        let (cmd, mode) = decide(&self.plant, &self.s.envelope, &verdict, self.shared_cmd, safety, self.mode, now);
        self.mode = mode;
        self.voltage = cmd.voltage;
        if mode != before {
            self.record_switch(now);
        }
        self.push_trace(now);
        k.schedule(now + self.s.period, Ev::Tick).expect("future tick");
    }

    fn on_plant_step(&mut self, k: &mut Kernel<Ev>, now: SimTime) {
        self.advance_plant(now);
        if self.first_unsafe.is_none() && !is_safe(&self.plant, &self.s.envelope) {
            self.first_unsafe = Some(now);
            self.events.push(EventRecord::PlantUnsafe { t_ns: now });
        }
        if is_destroyed(&self.plant, &self.s.plant) {
            self.first_unsafe.get_or_insert(now);
            self.destroyed_at = Some(now);
            self.events.push(EventRecord::PlantDestroyed { t_ns: now });
            self.push_trace(now);
            k.stop();
            return;
        }
        k.schedule(now + SUBSTEP, Ev::PlantStep).expect("future step");
    }

    fn on_reset(&mut self, now: SimTime) {
        let accepted = match operator_reset(self.mode, now) {
            Ok(mode) => {
                self.mode = mode;
                self.switches.push(ModeSwitch { time_ns: now, to: Controller::Complex, cause: Cause::Operator });
                self.events.push(EventRecord::ModeSwitch { t_ns: now, to: Controller::Complex, cause: Cause::Operator });
                true
            }
            Err(_) => false,
        };
        self.events.push(EventRecord::OperatorReset { t_ns: now, accepted });
        // the monitor restarts from Init at the next release
        self.monitor = MonitorState::new();
        self.armed_from = None;
        self.rearm_at_next_release = true;
    }

    fn report(&self, end: SimTime) -> RunReport {
        let s = self.s;
        let detection = self.switches.iter().find(|m| m.to == Controller::Safety);
        let detection_time = detection.map(|m| m.time_ns);
        let attack_start = (!matches!(s.attack.kind, AttackKind::None)).then_some(s.attack.start_time);
        let anchor = self.first_infected_release.or(attack_start);
        let per_iteration = self.control_send_overhead.checked_div(self.jobs_completed).unwrap_or(0);
        RunReport {
            scenario: s.name.clone(),
            seed: s.seed,
            mode: s.mode,
            horizon_ns: s.horizon.as_nanos(),
            end_time_ns: end,
            iterations: self.iterations,
            detection_time_ns: detection_time,
            detection_cause: detection.map(|m| m.cause),
            verdict: if self.monitor.is_tripped() { self.monitor.verdict.kind } else { VerdictKind::Nominal },
            first_violation: self.first_violation,
            violations: self.violations,
            attack_start_ns: attack_start,
            first_infected_release_ns: self.first_infected_release,
            first_infected_start_arrival_ns: self.first_infected_start_arrival,
            detection_latency_ns: match (detection_time, anchor) {
                (Some(d), Some(a)) if d >= a => Some((d - a).as_nanos()),
                _ => None,
            },
            timing_detection_latency_ns: match (self.first_violation, self.first_infected_start_arrival) {
                (Some(v), Some(a)) if v.time >= a => Some((v.time - a).as_nanos()),
                _ => None,
            },
            first_unsafe_time_ns: self.first_unsafe,
            plant_destroyed: self.destroyed_at.is_some(),
            destroyed_time_ns: self.destroyed_at,
            mode_switches: self.switches.clone(),
            max_malicious_exec_ns: self.max_malicious_exec,
            max_exec_ns: self.max_exec,
            messages_sent: self.messages_sent,
            messages_delivered: self.messages_delivered,
            messages_injected: self.messages_injected,
            messages_per_job: self.cfg.segments() as u64 + 1,
            sender_overhead_per_iteration_ns: per_iteration,
            fsm: self.cfg.clone(),
        }
    }
}

/// Runs a scenario to its horizon, or until the plant is destroyed.
pub fn run_scenario(s: &Scenario) -> Result<RunOutput, RunError> {
    s.validate()?;
    let cfg = resolve_fsm(s)?;
    run_with_fsm(s, cfg)
}

/// Runs a scenario with a monitor configuration supplied by the caller.
pub fn run_with_fsm(s: &Scenario, cfg: FsmConfig) -> Result<RunOutput, RunError> {
    cfg.validate().map_err(|e| ConfigError::invalid("fsm", e))?;
    let mut sim = Sim::new(s, cfg);
    let mut k: Kernel<Ev> = Kernel::new();
    let horizon = SimTime::ZERO + s.horizon;
    k.schedule(SimTime::ZERO, Ev::Release { iteration: 0 }).expect("t=0");
    k.schedule(SimTime::ZERO + s.tick_offset, Ev::Tick).expect("future");
    k.schedule(SimTime::ZERO + SUBSTEP, Ev::PlantStep).expect("future");
    if !matches!(s.attack.kind, AttackKind::None) {
        k.schedule(s.attack.start_time, Ev::AttackStart).expect("future");
    }
    for &t in &s.operator_resets {
        k.schedule(t, Ev::OperatorReset).expect("future");
    }
    let end = k.run_until(horizon, |k, e| sim.handle(k, e.payload));
    if let Some(e) = sim.error.take() {
        return Err(e);
    }
    let report = sim.report(end);
    Ok(RunOutput { report, trace: sim.trace, events: sim.events })
}
