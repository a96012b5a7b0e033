//! The discrete-event kernel on its own: ordered timers, cancellation and a
//! labeled random stream.

use secure_simplex::kernel::{Kernel, RngStream};
use secure_simplex::time::{SimDuration, SimTime};

#[derive(Debug)]
enum Ev {
    Tick(u32),
    Timeout,
}

fn main() {
    let mut k = Kernel::new();
    let mut rng = RngStream::new(7, "example.jitter");
    k.schedule(SimTime::ZERO, Ev::Tick(0)).unwrap();
    let timeout = k.schedule(SimTime::from_micros(50), Ev::Timeout).unwrap();
    let end = k.run_until(SimTime::from_micros(100), |k, e| {
        println!("{:>8} {:?}", e.due, e.payload);
        if let Ev::Tick(n) = e.payload {
            if n == 3 {
                // the work finished in time; the timeout never fires
                k.cancel(timeout);
            }
            if n < 5 {
                k.schedule_in(SimDuration::from_nanos(10_000 + rng.uniform_inclusive(0, 600)), Ev::Tick(n + 1));
            }
        }
    });
    println!("clock at {end}, {:?}", k.stats());
}
