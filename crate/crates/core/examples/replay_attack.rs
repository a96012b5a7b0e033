//! Replaying recorded timing messages hides the malicious job from the
//! monitor; the physical envelope still catches the damage.

use secure_simplex::attack::{AttackKind, AttackSpec, DEFAULT_LOOP_COST_CYCLES};
use secure_simplex::harness::{run_scenario, Scenario};
use secure_simplex::plant::PlantState;
use secure_simplex::time::SimTime;

fn main() {
    for stretch in [0, 3_000] {
        let s = Scenario {
            initial_state: PlantState::new(0.003, 0.0, 0.0, 0.0),
            attack: AttackSpec::new(
                SimTime::from_millis(1_000),
                AttackKind::Replay {
                    window_periods: 2,
                    destabilize: true,
                    overrun_bound: 1,
                    per_iteration_cycles: DEFAULT_LOOP_COST_CYCLES,
                    stretch_first_job_ns: stretch,
                },
            ),
            ..Default::default()
        };
        let r = run_scenario(&s).expect("valid scenario").report;
        println!(
            "replay, first gap stretched by {stretch} ns: {} injected messages, verdict {:?}, caught by {:?} at {}",
            r.messages_injected,
            r.verdict,
            r.detection_cause.unwrap(),
            r.detection_time_ns.unwrap()
        );
    }
}
