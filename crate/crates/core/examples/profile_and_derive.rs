//! Simulated measurement campaign: dual-loop profile of the control task and
//! the monitor windows derived from it.

use secure_simplex::harness::{profile_and_derive, Scenario};

fn main() {
    let s = Scenario::default();
    for iterations in [1, 10, 100, 1_000, 10_000, 100_000] {
        let out = profile_and_derive(&s, iterations).expect("valid scenario");
        let p = out.profile;
        println!(
            "{iterations:>7} runs: best {:>5} worst {:>5} steady {:>5}..{:<5} ({} cycles, {} ns)",
            p.best,
            p.worst,
            p.steady_low,
            p.steady_high,
            p.steady_width(),
            out.steady_width_ns
        );
    }
    let fsm = profile_and_derive(&s, 100_000).unwrap().fsm;
    println!("{}", serde_json::to_string_pretty(&fsm).unwrap());
}
