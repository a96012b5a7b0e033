//! Sweeps channel jitter with derived windows and counts false positives.

use secure_simplex::harness::{run_sweep, sweep_csv, EventDetail, Scenario};
use secure_simplex::time::SimDuration;

fn main() {
    let base = Scenario { horizon: SimDuration::from_millis(5_000), event_detail: EventDetail::Summary, ..Default::default() };
    let values: Vec<String> = [0, 150, 300, 600, 1_200].iter().map(|v| v.to_string()).collect();
    let rows = run_sweep(&base, "channel.jitter_bound_ns", &values).expect("numeric axis");
    print!("{}", String::from_utf8(sweep_csv(&rows)).unwrap());
}
