//! Deterministic discrete-event core: virtual clock, ordered event queue and
//! labeled random streams.
//!
//! Events are ordered by `(due, sequence)`. The sequence number is assigned at
//! scheduling time, so events that share a due time run in insertion order.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::time::{SimDuration, SimTime};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("event scheduled at {due} but the clock is already at {now}")]
    ScheduledInPast { due: SimTime, now: SimTime },
}

/// Handle returned by [`Kernel::schedule`]; used to cancel a pending event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub due: SimTime,
    pub sequence: u64,
    pub payload: P,
}

struct Entry<P>(Event<P>);

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.0.due == other.0.due && self.0.sequence == other.0.sequence
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Entry<P> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.due, other.0.sequence).cmp(&(self.0.due, self.0.sequence))
    }
}

/// Counters used to check event conservation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KernelStats {
    pub scheduled: u64,
    pub processed: u64,
    pub cancelled: u64,
}

/// Single-threaded event loop over payload type `P`.
pub struct Kernel<P> {
    now: SimTime,
    next_sequence: u64,
    queue: BinaryHeap<Entry<P>>,
    live: HashSet<u64>,
    stats: KernelStats,
    stopped: bool,
}

impl<P> Default for Kernel<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Kernel<P> {
    pub fn new() -> Self {
        Kernel {
            now: SimTime::ZERO,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            live: HashSet::new(),
            stats: KernelStats::default(),
            stopped: false,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn stats(&self) -> KernelStats {
        self.stats
    }

    /// Number of events scheduled and neither processed nor cancelled.
    pub fn pending(&self) -> usize {
        self.live.len()
    }

    pub fn schedule(&mut self, due: SimTime, payload: P) -> Result<EventHandle, KernelError> {
        if due < self.now {
            return Err(KernelError::ScheduledInPast { due, now: self.now });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Entry(Event { due, sequence, payload }));
        self.live.insert(sequence);
        self.stats.scheduled += 1;
        Ok(EventHandle(sequence))
    }

    pub fn schedule_in(&mut self, delay: SimDuration, payload: P) -> EventHandle {
        let due = self.now + delay;
        // cannot fail: due >= now
        self.schedule(due, payload).expect("relative schedule is never in the past")
    }

    /// Removes a pending event. Returns `false` if it already fired or was
    /// cancelled before.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        let removed = self.live.remove(&handle.0);
        if removed {
            self.stats.cancelled += 1;
        }
        removed
    }

    /// Requests the running [`run_until`](Self::run_until) loop to return
    /// after the current event.
    pub fn stop(&mut self) {
        self.stopped = true;
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    /// Due time of the earliest live event.
    pub fn peek_due(&mut self) -> Option<SimTime> {
        self.discard_cancelled();
        self.queue.peek().map(|e| e.0.due)
    }

    fn discard_cancelled(&mut self) {
        while let Some(top) = self.queue.peek() {
            if self.live.contains(&top.0.sequence) {
                break;
            }
            self.queue.pop();
        }
    }

    /// Pops the next live event if it is due at or before `deadline`, and
    /// advances the clock to its due time.
    pub fn pop_due(&mut self, deadline: SimTime) -> Option<Event<P>> {
        self.discard_cancelled();
        if self.queue.peek()?.0.due > deadline {
            return None;
        }
        let Entry(event) = self.queue.pop()?;
        self.live.remove(&event.sequence);
        debug_assert!(event.due >= self.now);
        self.now = event.due;
        self.stats.processed += 1;
        Some(event)
    }

    /// Processes every event due at or before `deadline` in `(due, sequence)`
    /// order. The clock ends at `deadline` unless the handler called
    /// [`stop`](Self::stop), in which case it stays at the last event.
    pub fn run_until<F>(&mut self, deadline: SimTime, mut handler: F) -> SimTime
    where
        F: FnMut(&mut Kernel<P>, Event<P>),
    {
        self.stopped = false;
        while let Some(event) = self.pop_due(deadline) {
            handler(self, event);
            if self.stopped {
                return self.now;
            }
        }
        if deadline > self.now {
            self.now = deadline;
        }
        self.now
    }
}

/// A reproducible random stream identified by a seed and a label.
///
/// Streams with different labels draw from disjoint ChaCha streams, so adding
/// draws to one component never perturbs another.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    label: String,
    rng: ChaCha8Rng,
}

fn label_stream_id(label: &str) -> u64 {
    // FNV-1a
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl RngStream {
    pub fn new(seed: u64, label: &str) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(label_stream_id(label));
        RngStream { seed, label: label.to_owned(), rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Uniform integer in the closed range `[lo, hi]`.
    pub fn uniform_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        if lo >= hi {
            return lo;
        }
        self.rng.gen_range(lo..=hi)
    }

    /// Uniform integer in the half-open range `[lo, hi)`; `lo` if empty.
    pub fn uniform_below(&mut self, lo: u64, hi: u64) -> u64 {
        if lo >= hi {
            return lo;
        }
        self.rng.gen_range(lo..hi)
    }

    /// True with probability `p` (clamped to `[0, 1]`).
    pub fn chance(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        self.rng.gen_bool(p)
    }

    pub fn unit_f64(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}
