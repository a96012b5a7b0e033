//! The safety controller pulling the pendulum back from every corner of the
//! recoverable region.

use secure_simplex::controllers::{safety_control, ControlTaskConfig};
use secure_simplex::plant::*;

fn main() {
    let p = PlantParams::default();
    let env = SafetyEnvelope::default();
    let cfg = ControlTaskConfig::safety();
    let dt = cfg.period.as_secs_f64();
    for corner in env.vertices() {
        let mut s = corner;
        let mut prev = SensorReading { x: s.x - s.x_dot * dt, theta: s.theta - s.theta_dot * dt };
        let mut peak_x: f64 = 0.0;
        for _ in 0..250 {
            let now = read_sensors(&s, None);
            let cmd = safety_control(&cfg, &now, &prev, p.voltage_limit);
            prev = now;
            s = step_dynamics(&s, cmd, cfg.period, &p);
            peak_x = peak_x.max(s.x.abs());
        }
        println!(
            "from x {:+.3} v {:+.3} th {:+.3} w {:+.3}: peak |x| {peak_x:.3} m, after 5 s |th| {:.1e}",
            corner.x,
            corner.x_dot,
            corner.theta,
            corner.theta_dot,
            s.theta.abs()
        );
    }
}
