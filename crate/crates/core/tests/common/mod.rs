#![allow(dead_code)]

use secure_simplex::kernel::RngStream;
use secure_simplex::monitor::{FsmConfig, MonitorState, Verdict, VerdictKind, Window};
use secure_simplex::side_channel::MessageKind::{self, *};
use secure_simplex::time::{SimDuration, SimTime};

/// Drives a monitor the way the engine does: due timers fire as separate
/// events before any later message.
pub struct Driver<'c> {
    pub cfg: &'c FsmConfig,
    pub state: MonitorState,
    pub first_violation: Option<Verdict>,
}

impl<'c> Driver<'c> {
    pub fn new(cfg: &'c FsmConfig) -> Self {
        Driver { cfg, state: MonitorState::new(), first_violation: None }
    }

    fn note(&mut self, v: Verdict) {
        if v.is_violation() && self.first_violation.is_none() {
            self.first_violation = Some(v);
        }
    }

    /// Fires every timer due at or before `t`.
    pub fn advance(&mut self, t: SimTime) {
        while let Some((clock, due)) = self.state.next_timer() {
            if due > t {
                break;
            }
            let (s, v) = self.state.on_timer(clock, due, self.cfg).expect("timer in order");
            self.state = s;
            self.note(v);
        }
    }

    pub fn message(&mut self, kind: MessageKind, t: SimTime) {
        self.advance(t);
        let (s, v) = self.state.on_message(kind, t, self.cfg).expect("message in order");
        self.state = s;
        self.note(v);
    }

    pub fn feed(&mut self, trace: &[(MessageKind, SimTime)]) {
        for &(kind, t) in trace {
            self.message(kind, t);
        }
    }
}

pub fn within(w: &Window, rng: &mut RngStream) -> SimDuration {
    w.must_wait + SimDuration(rng.uniform_below(0, w.can_wait.as_nanos()))
}

/// Messages of one conforming job starting at `start`, followed by idle
/// heartbeats up to (not including) `next_start`. Returns the job's end.
pub fn conforming_job(
    cfg: &FsmConfig,
    rng: &mut RngStream,
    start: SimTime,
    next_start: SimTime,
    out: &mut Vec<(MessageKind, SimTime)>,
) -> SimTime {
    out.push((StartControl, start));
    let mut t = start;
    for (i, w) in cfg.control().iter().enumerate() {
        t += within(w, rng);
        let kind = if i + 1 == cfg.segments() { EndControl } else { Checkpoint };
        out.push((kind, t));
    }
    let end = t;
    loop {
        let hb = t + within(cfg.idle(), rng);
        if hb >= next_start {
            break;
        }
        out.push((IdleHeartbeat, hb));
        t = hb;
    }
    end
}

/// `jobs` conforming jobs from `first_start`. Returns the trace and the start
/// time of the job that would follow.
pub fn conforming_trace(
    cfg: &FsmConfig,
    rng: &mut RngStream,
    first_start: SimTime,
    jobs: u64,
) -> (Vec<(MessageKind, SimTime)>, SimTime) {
    let mut out = Vec::new();
    let mut start = first_start;
    for _ in 0..jobs {
        let next = start + within(cfg.period(), rng);
        conforming_job(cfg, rng, start, next, &mut out);
        start = next;
    }
    (out, start)
}

/// Smallest config family exercised by the randomized monitor tests: the
/// reported prototype plus derived-looking variants with shorter periods so
/// that traces stay cheap.
pub fn config_variant(rng: &mut RngStream) -> FsmConfig {
    if rng.chance(0.5) {
        return FsmConfig::reported_prototype();
    }
    let segments = rng.uniform_inclusive(1, 4) as usize;
    let control = (0..segments)
        .map(|_| Window::new(SimDuration(rng.uniform_inclusive(500, 5_000)), SimDuration(rng.uniform_inclusive(100, 3_000))))
        .collect::<Vec<_>>();
    let job_max: u64 = control.iter().map(|w| w.max().as_nanos()).sum();
    let idle = Window::new(SimDuration(rng.uniform_inclusive(2_000, 20_000)), SimDuration(rng.uniform_inclusive(200, 3_000)));
    let period_must = job_max + 2 * idle.max().as_nanos() + rng.uniform_inclusive(10_000, 200_000);
    let period = Window::new(SimDuration(period_must), SimDuration(rng.uniform_inclusive(1_000, 20_000)));
    let cfg = FsmConfig::with_segments(control, idle, period);
    cfg.validate().expect("generated config is valid");
    cfg
}

/// Clock a verdict's latency is measured against.
pub fn bound_for(kind: VerdictKind, cfg: &FsmConfig) -> SimDuration {
    match kind {
        VerdictKind::ExecTooLong | VerdictKind::ExecTooShort => {
            cfg.control().iter().map(Window::max).max().unwrap()
        }
        VerdictKind::PeriodTooLong | VerdictKind::PeriodTooShort => cfg.period().max(),
        VerdictKind::IdleSilence | VerdictKind::IdleTooEarly => cfg.idle().max(),
        VerdictKind::UnexpectedMessage | VerdictKind::Nominal => SimDuration::ZERO,
    }
}

/// A trace that departs from the configuration exactly once.
pub struct Anomaly {
    pub trace: Vec<(MessageKind, SimTime)>,
    /// Event the violated window is measured from.
    pub anchor: SimTime,
    pub expected: Verdict,
    /// Time up to which timers must be run after the last message.
    pub horizon: SimTime,
}

pub const VIOLATION_CLASSES: [VerdictKind; 7] = [
    VerdictKind::ExecTooLong,
    VerdictKind::ExecTooShort,
    VerdictKind::PeriodTooLong,
    VerdictKind::PeriodTooShort,
    VerdictKind::IdleSilence,
    VerdictKind::IdleTooEarly,
    VerdictKind::UnexpectedMessage,
];

/// `prefix_jobs` conforming jobs followed by one anomaly of class `kind`.
pub fn anomalous_trace(kind: VerdictKind, cfg: &FsmConfig, rng: &mut RngStream, prefix_jobs: u64) -> Anomaly {
    let first = SimTime(rng.uniform_inclusive(0, 1_000));
    let (mut trace, s) = conforming_trace(cfg, rng, first, prefix_jobs);
    let n = cfg.segments();
    let expect = |kind, t: SimTime| Verdict { kind, time: t };
    // conforming job body up to the start of segment `k`
    let lead_in = |rng: &mut RngStream, trace: &mut Vec<(MessageKind, SimTime)>, k: usize| {
        trace.push((StartControl, s));
        let mut t = s;
        for w in &cfg.control()[..k] {
            t += within(w, rng);
            trace.push((Checkpoint, t));
        }
        t
    };
    let closing = |k: usize| if k + 1 == n { EndControl } else { Checkpoint };
    match kind {
        VerdictKind::ExecTooLong => {
            let k = rng.uniform_below(0, n as u64) as usize;
            let anchor = lead_in(rng, &mut trace, k);
            let max = cfg.segment(k).max();
            let late = anchor + max + SimDuration(rng.uniform_inclusive(0, 3 * max.as_nanos()));
            trace.push((closing(k), late));
            Anomaly { trace, anchor, expected: expect(kind, anchor + max), horizon: late }
        }
        VerdictKind::ExecTooShort => {
            let k = rng.uniform_below(0, n as u64) as usize;
            let anchor = lead_in(rng, &mut trace, k);
            let early = anchor + SimDuration(rng.uniform_below(0, cfg.segment(k).must_wait.as_nanos()));
            trace.push((closing(k), early));
            Anomaly { trace, anchor, expected: expect(kind, early), horizon: early }
        }
        VerdictKind::PeriodTooLong => {
            let max = cfg.period().max();
            let next = s + max + SimDuration(rng.uniform_inclusive(0, max.as_nanos() / 10));
            conforming_job(cfg, rng, s, next, &mut trace);
            trace.push((StartControl, next));
            Anomaly { trace, anchor: s, expected: expect(kind, s + max), horizon: next }
        }
        VerdictKind::PeriodTooShort => {
            let mut job = Vec::new();
            let end = conforming_job(cfg, rng, s, s + cfg.period().must_wait, &mut job);
            let next = SimTime(rng.uniform_below(end.as_nanos(), (s + cfg.period().must_wait).as_nanos()));
            // drop heartbeats at or after the early start
            job.retain(|&(_, t)| t < next || t <= end);
            trace.extend(job);
            trace.push((StartControl, next));
            Anomaly { trace, anchor: s, expected: expect(kind, next), horizon: next }
        }
        VerdictKind::IdleSilence | VerdictKind::IdleTooEarly => {
            let next = s + within(cfg.period(), rng);
            let mut job = Vec::new();
            let end = conforming_job(cfg, rng, s, next, &mut job);
            let job_len = cfg.segments() + 1;
            // idle anchors: the end message, then each heartbeat
            let anchors: Vec<usize> = (job_len - 1..job.len())
                .filter(|&i| job[i].1 + cfg.idle().max() < next)
                .collect();
            assert!(!anchors.is_empty(), "period leaves room for an idle window");
            let at = anchors[rng.uniform_below(0, anchors.len() as u64) as usize];
            let anchor = job[at].1;
            debug_assert!(at >= job_len - 1 && anchor >= end);
            job.truncate(at + 1);
            trace.extend(job);
            if kind == VerdictKind::IdleSilence {
                let due = anchor + cfg.idle().max();
                Anomaly { trace, anchor, expected: expect(kind, due), horizon: due }
            } else {
                let early = anchor + SimDuration(rng.uniform_below(0, cfg.idle().must_wait.as_nanos()));
                trace.push((IdleHeartbeat, early));
                Anomaly { trace, anchor, expected: expect(kind, early), horizon: early }
            }
        }
        VerdictKind::UnexpectedMessage => {
            let t = match rng.uniform_below(0, 4) {
                // first message is not a job start
                0 if prefix_jobs == 0 => {
                    let t = s;
                    trace.push(([Checkpoint, EndControl, IdleHeartbeat][rng.uniform_below(0, 3) as usize], t));
                    t
                }
                // job-phase message while idle
                0 | 1 => {
                    let mut job = Vec::new();
                    let next = s + within(cfg.period(), rng);
                    let end = conforming_job(cfg, rng, s, next, &mut job);
                    job.truncate(cfg.segments() + 1);
                    trace.extend(job);
                    let t = end + SimDuration(rng.uniform_below(0, cfg.idle().max().as_nanos()));
                    trace.push(([Checkpoint, EndControl][rng.uniform_below(0, 2) as usize], t));
                    t
                }
                // heartbeat or a second start inside a segment
                2 => {
                    let k = rng.uniform_below(0, n as u64) as usize;
                    let anchor = lead_in(rng, &mut trace, k);
                    let t = anchor + SimDuration(rng.uniform_below(0, cfg.segment(k).max().as_nanos()));
                    trace.push(([IdleHeartbeat, StartControl][rng.uniform_below(0, 2) as usize], t));
                    t
                }
                // wrong closing message for the segment
                _ => {
                    let k = rng.uniform_below(0, n as u64) as usize;
                    let anchor = lead_in(rng, &mut trace, k);
                    let t = anchor + within(cfg.segment(k), rng);
                    trace.push((if k + 1 == n { Checkpoint } else { EndControl }, t));
                    t
                }
            };
            Anomaly { trace, anchor: t, expected: expect(kind, t), horizon: t }
        }
        VerdictKind::Nominal => unreachable!("nominal is not a violation class"),
    }
}

/// Runs an anomaly through a fresh monitor; returns the first violation.
pub fn first_violation(cfg: &FsmConfig, a: &Anomaly) -> Option<Verdict> {
    let mut d = Driver::new(cfg);
    d.feed(&a.trace);
    d.advance(a.horizon);
    d.first_violation
}

pub fn shipped(name: &str) -> secure_simplex::harness::Scenario {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"));
    secure_simplex::harness::Scenario::load(&path).expect("shipped scenario loads")
}

pub const SHIPPED: [&str; 8] = [
    "nominal",
    "overrun",
    "undertime",
    "period_drift",
    "idle_silence",
    "destabilize_s3a",
    "destabilize_vanilla",
    "replay",
];
