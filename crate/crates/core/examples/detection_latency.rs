//! Overrun attack against the prototype monitor windows: how long after the
//! infected job starts does the monitor trip?

use secure_simplex::attack::{AttackKind, AttackSpec, DEFAULT_LOOP_COST_CYCLES};
use secure_simplex::harness::{run_scenario, FsmSource, Scenario};
use secure_simplex::monitor::FsmConfig;
use secure_simplex::side_channel::ChannelModel;
use secure_simplex::time::{SimDuration, SimTime};

fn main() {
    for bound in [1, 10, 100] {
        let s = Scenario {
            name: format!("overrun x{bound}"),
            horizon: SimDuration::from_millis(1_100),
            fsm: FsmSource::Explicit(FsmConfig::reported_prototype()),
            channel: ChannelModel { jitter_bound: SimDuration::from_nanos(150), ..Default::default() },
            attack: AttackSpec::new(
                SimTime::from_millis(1_000),
                AttackKind::Overrun { loop_bound: bound, per_iteration_cycles: DEFAULT_LOOP_COST_CYCLES },
            ),
            ..Default::default()
        };
        let r = run_scenario(&s).expect("valid scenario").report;
        println!(
            "loop bound {bound:>3}: malicious job {:>8} ns, tripped {:?} {} ns after its start message arrived",
            r.max_malicious_exec_ns.unwrap(),
            r.verdict,
            r.timing_detection_latency_ns.unwrap(),
        );
    }
}
