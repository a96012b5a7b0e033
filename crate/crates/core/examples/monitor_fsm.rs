//! Drives the timing monitor by hand through one good job and one that runs
//! past its window.

use secure_simplex::monitor::{FsmConfig, MonitorState};
use secure_simplex::side_channel::MessageKind::{self, *};
use secure_simplex::time::SimTime;

fn main() {
    let cfg = FsmConfig::reported_prototype();
    let us = |v: u64| SimTime::from_nanos(v * 1_000);

    // a 5 µs job, heartbeats every 100 µs, then the next release at 20 ms
    let mut stream: Vec<(MessageKind, SimTime)> = vec![(StartControl, us(0)), (EndControl, us(5))];
    stream.extend((1..200).map(|i| (IdleHeartbeat, us(5 + 100 * i))));
    stream.push((StartControl, us(20_000)));

    let mut m = MonitorState::new();
    for (i, &(kind, at)) in stream.iter().enumerate() {
        let (next, verdict) = m.on_message(kind, at, &cfg).unwrap();
        m = next;
        if i < 3 || i + 2 > stream.len() {
            println!("{at:>12} {kind:?}: {:?} -> {:?}", verdict.kind, m.location);
        } else if i == 3 {
            println!("{:>12}", "...");
        }
    }
    // the second job never reports back; fire timers until the monitor trips
    while let Some((clock, due)) = m.next_timer() {
        let (next, verdict) = m.on_timer(clock, due, &cfg).unwrap();
        m = next;
        println!("{due:>12} {clock:?} timer: {:?} -> {:?}", verdict.kind, m.location);
    }
}
