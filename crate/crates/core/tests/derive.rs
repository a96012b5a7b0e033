use proptest::prelude::*;
use secure_simplex::exec_model::*;
use secure_simplex::kernel::RngStream;
use secure_simplex::time::SimDuration;

fn ns(v: u64) -> SimDuration {
    SimDuration::from_nanos(v)
}

fn inputs(jitter: u64, overhead: u64, guards: GuardMargins, segments: usize) -> DeriveInputs {
    DeriveInputs {
        jitter: ns(jitter),
        sender_overhead: ns(overhead),
        guards,
        period: SimDuration::from_millis(20),
        idle_interval: SimDuration::from_micros(100),
        segments,
    }
}

fn arb_profile() -> impl Strategy<Value = ExecutionProfile> {
    (5_000u64..40_000, 0u64..5_000, 0u64..500, 0u64..5_000).prop_map(|(low, width, below, above)| ExecutionProfile {
        best: low - below.min(low),
        worst: low + width + above,
        steady_low: low,
        steady_high: low + width,
        instrumentation_overhead: 265,
    })
}

fn arb_guards() -> impl Strategy<Value = GuardMargins> {
    (0u64..400, 0u64..400, 0u64..10_000, 0u64..5_000)
        .prop_map(|(l, u, p, i)| GuardMargins { lower: ns(l), upper: ns(u), period: ns(p), idle: ns(i) })
}

proptest! {
    #[test]
    fn more_jitter_never_narrows_the_control_window(
        profile in arb_profile(), guards in arb_guards(), j1 in 0u64..800, extra in 0u64..800, overhead in 0u64..100,
    ) {
        let cpu = CpuModel::default();
        let a = derive_fsm_params(&profile, &cpu, &inputs(j1, overhead, guards, 1));
        let b = derive_fsm_params(&profile, &cpu, &inputs(j1 + extra, overhead, guards, 1));
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!(b.can_wait_c() >= a.can_wait_c());
            prop_assert!(b.must_wait_c() <= a.must_wait_c());
        }
    }

    #[test]
    fn window_covers_the_steady_band_plus_jitter(
        profile in arb_profile(), guards in arb_guards(), jitter in 0u64..800, overhead in 0u64..100, segments in 1usize..5,
    ) {
        let cpu = CpuModel::default();
        let Ok(cfg) = derive_fsm_params(&profile, &cpu, &inputs(jitter, overhead, guards, segments)) else {
            return Ok(());
        };
        let high = cpu.cycles_to_time(profile.steady_high).as_nanos();
        let low = cpu.cycles_to_time(profile.steady_low).as_nanos();
        let n = segments as u64;
        for w in cfg.control() {
            prop_assert!(w.max().as_nanos() >= high.div_ceil(n) + overhead + jitter);
            prop_assert!(w.must_wait.as_nanos() <= low / n + overhead);
        }
        let period = cfg.period();
        prop_assert!(period.must_wait <= SimDuration::from_millis(20));
        prop_assert!(period.max() >= SimDuration::from_millis(20) + ns(jitter));
    }

    #[test]
    fn profile_matches_brute_force(
        timed in proptest::collection::vec(1_000u64..30_000, 1..400),
        instr in proptest::collection::vec(250u64..290, 1..50),
        window_frac in 0.01f64..1.0,
    ) {
        let window = ((timed.len() as f64 * window_frac).ceil() as usize).clamp(1, timed.len());
        let p = dual_loop_profile(&timed, &instr, window).unwrap();
        let mut sorted = instr.clone();
        sorted.sort();
        let m = sorted.len();
        let overhead = if m % 2 == 1 { sorted[m / 2] } else { (sorted[m / 2 - 1] + sorted[m / 2]) / 2 };
        let corrected: Vec<u64> = timed.iter().map(|t| t.saturating_sub(overhead)).collect();
        let tail = &corrected[corrected.len() - window..];
        prop_assert_eq!(p.instrumentation_overhead, overhead);
        prop_assert_eq!(p.best, *corrected.iter().min().unwrap());
        prop_assert_eq!(p.worst, *corrected.iter().max().unwrap());
        prop_assert_eq!(p.steady_low, *tail.iter().min().unwrap());
        prop_assert_eq!(p.steady_high, *tail.iter().max().unwrap());
        prop_assert!(p.is_ordered());
    }

    #[test]
    fn synthetic_profiles_are_ordered(seed in any::<u64>(), n in 1usize..2_000, spikes in 0.0f64..0.05) {
        let dist = ExecTimeDistribution { spike_probability: spikes, ..Default::default() };
        let mut exec = RngStream::new(seed, "exec");
        let mut instr = RngStream::new(seed, "instr");
        let timed: Vec<u64> = (0..n as u64).map(|i| dist.draw(i, &mut exec) + instr.uniform_inclusive(260, 270)).collect();
        let empty: Vec<u64> = (0..n).map(|_| instr.uniform_inclusive(260, 270)).collect();
        let p = dual_loop_profile(&timed, &empty, default_steady_window(n)).unwrap();
        prop_assert!(p.is_ordered());
    }
}

#[test]
fn reported_band_width_from_default_distribution() {
    let dist = ExecTimeDistribution::default();
    let mut exec = RngStream::new(42, "exec");
    let mut instr = RngStream::new(42, "instr");
    let n = 100_000u64;
    let timed: Vec<u64> = (0..n).map(|i| dist.draw(i, &mut exec) + instr.uniform_inclusive(260, 270)).collect();
    let empty: Vec<u64> = (0..n).map(|_| instr.uniform_inclusive(260, 270)).collect();
    let p = dual_loop_profile(&timed, &empty, default_steady_window(n as usize)).unwrap();
    let width = p.steady_width() as f64;
    assert!((width - 1_590.0).abs() <= 0.05 * 1_590.0, "width {width}");
    assert!((260..=270).contains(&p.instrumentation_overhead));
    assert!(p.worst > p.steady_high, "cold start sits above the steady band");
}

#[test]
fn reported_enforced_window_from_reported_band() {
    // 4.8-5.4 µs steady band, guards 0.2/0.3 µs, no channel terms
    let profile = ExecutionProfile { best: 4_800, worst: 5_400, steady_low: 4_800, steady_high: 5_400, instrumentation_overhead: 0 };
    let cpu = CpuModel { frequency_hz: 1_000_000_000, message_overhead_cycles: 0 };
    let cfg = derive_fsm_params(&profile, &cpu, &inputs(0, 0, GuardMargins::default(), 1)).unwrap();
    assert_eq!(cfg.must_wait_c(), ns(4_600));
    assert_eq!(cfg.can_wait_c(), ns(1_100));
}

#[test]
fn segments_split_the_job() {
    let profile = ExecutionProfile { best: 12_000, worst: 12_000, steady_low: 12_000, steady_high: 12_000, instrumentation_overhead: 0 };
    let cpu = CpuModel { frequency_hz: 1_000_000_000, message_overhead_cycles: 0 };
    let zero = GuardMargins { lower: ns(0), upper: ns(0), ..Default::default() };
    for n in 1..=4 {
        let cfg = derive_fsm_params(&profile, &cpu, &inputs(0, 0, zero, n)).unwrap();
        assert_eq!(cfg.segments(), n);
        assert!(cfg.control().iter().all(|w| w.must_wait == ns(12_000 / n as u64)));
    }
}
