//! The same destabilizing controller, watched once through the timing side
//! channel and once through the plant state alone.

use secure_simplex::attack::{AttackKind, AttackSpec, DEFAULT_LOOP_COST_CYCLES};
use secure_simplex::harness::{run_scenario, FsmSource, MonitorMode, Scenario};
use secure_simplex::monitor::FsmConfig;
use secure_simplex::plant::PlantState;
use secure_simplex::side_channel::ChannelModel;
use secure_simplex::time::{SimDuration, SimTime};

fn main() {
    let base = Scenario {
        initial_state: PlantState::new(0.003, 0.0, 0.0, 0.0),
        // the prototype windows assume a quiet channel
        fsm: FsmSource::Explicit(FsmConfig::reported_prototype()),
        channel: ChannelModel { jitter_bound: SimDuration::from_nanos(150), ..Default::default() },
        attack: AttackSpec::new(
            SimTime::from_millis(1_000),
            AttackKind::Destabilize { loop_bound: 1, per_iteration_cycles: DEFAULT_LOOP_COST_CYCLES },
        ),
        ..Default::default()
    };
    let mut latency = Vec::new();
    for mode in [MonitorMode::S3a, MonitorMode::VanillaSimplex] {
        let r = run_scenario(&Scenario { mode, ..base.clone() }).expect("valid scenario").report;
        let anchor = r.first_infected_start_arrival_ns.unwrap();
        let after = r.detection_time_ns.unwrap() - anchor;
        println!(
            "{mode:?}: switched to safety by {:?} after {after}, plant intact: {}",
            r.detection_cause.unwrap(),
            !r.plant_destroyed
        );
        latency.push(after.as_nanos() as f64);
    }
    println!("timing channel is {:.0}x faster", latency[1] / latency[0]);
}
