//! Timing-message channel from the untrusted CPU to the trusted monitor.

use serde::{Deserialize, Serialize};

use crate::kernel::RngStream;
use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    StartControl,
    /// Intra-job progress marker; only sent when the job is split into
    /// several monitored segments.
    Checkpoint,
    EndControl,
    IdleHeartbeat,
}

/// Forensics tag. The monitor never looks at it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Legitimate,
    Injected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingMessage {
    pub kind: MessageKind,
    pub send_time: SimTime,
    pub arrival_time: SimTime,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModel {
    #[serde(rename = "base_delay_ns")]
    pub base_delay: SimDuration,
    #[serde(rename = "jitter_bound_ns")]
    pub jitter_bound: SimDuration,
    #[serde(rename = "sender_overhead_ns")]
    pub sender_overhead: SimDuration,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            base_delay: SimDuration::from_micros(1),
            jitter_bound: SimDuration::from_nanos(600),
            sender_overhead: SimDuration::from_nanos(50),
        }
    }
}

/// A channel instance: the model plus its jitter stream and FIFO state.
#[derive(Debug, Clone)]
pub struct SideChannel {
    model: ChannelModel,
    rng: RngStream,
    last_arrival: SimTime,
}

impl SideChannel {
    pub fn new(model: ChannelModel, rng: RngStream) -> Self {
        SideChannel { model, rng, last_arrival: SimTime::ZERO }
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    /// Issues a message at `now`. Returns the time the sender's CPU is free
    /// again and the message with its arrival time filled in.
    ///
    /// Arrival is `now + base_delay + U[0, jitter_bound]`, clamped so that
    /// arrivals never overtake earlier messages.
    pub fn send(&mut self, kind: MessageKind, now: SimTime, origin: Origin) -> (SimTime, TimingMessage) {
        let jitter = self.rng.uniform_inclusive(0, self.model.jitter_bound.as_nanos());
        let arrival = (now + self.model.base_delay + SimDuration(jitter)).max(self.last_arrival);
        self.last_arrival = arrival;
        let msg = TimingMessage { kind, send_time: now, arrival_time: arrival, origin };
        (now + self.model.sender_overhead, msg)
    }
}
