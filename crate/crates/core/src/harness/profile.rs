//! Simulated measurement campaign feeding the monitor parameters.

use serde::{Deserialize, Serialize};

use crate::exec_model::{default_steady_window, derive_fsm_params, dual_loop_profile, DeriveInputs, ExecutionProfile};
use crate::kernel::RngStream;
use crate::monitor::FsmConfig;

use super::scenario::{ConfigError, DeriveSpec, FsmSource, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOutcome {
    pub iterations: u64,
    pub profile: ExecutionProfile,
    pub steady_width_ns: u64,
    pub fsm: FsmConfig,
}

/// Raw cycle counts of the instrumented loop and of the instrumentation-only
/// loop, `iterations` each.
pub fn measurement_traces(s: &Scenario, spec: &DeriveSpec, iterations: u64) -> (Vec<u64>, Vec<u64>) {
    let mut exec_rng = RngStream::new(s.seed, "profile.exec");
    let mut timed_instr_rng = RngStream::new(s.seed, "profile.instrumentation.timed");
    let mut empty_rng = RngStream::new(s.seed, "profile.instrumentation.empty");
    let (lo, hi) = (spec.instrumentation.lo, spec.instrumentation.hi);
    let timed = (0..iterations)
        .map(|i| s.exec.draw(i, &mut exec_rng) + timed_instr_rng.uniform_inclusive(lo, hi))
        .collect();
    let empty = (0..iterations).map(|_| empty_rng.uniform_inclusive(lo, hi)).collect();
    (timed, empty)
}

/// Profiles the control task over `iterations` simulated runs and derives
/// monitor windows from the result. Derivation settings come from the
/// scenario's `fsm.derived` block, or the defaults when the scenario pins an
/// explicit configuration.
pub fn profile_and_derive(s: &Scenario, iterations: u64) -> Result<ProfileOutcome, ConfigError> {
    if iterations == 0 {
        return Err(ConfigError::invalid("iterations", "must be at least one"));
    }
    let spec = match &s.fsm {
        FsmSource::Derived(d) => *d,
        FsmSource::Explicit(_) => DeriveSpec::default(),
    };
    let (timed, empty) = measurement_traces(s, &spec, iterations);
    let profile = dual_loop_profile(&timed, &empty, default_steady_window(timed.len()))
        .map_err(|e| ConfigError::invalid("iterations", e))?;
    let inputs = DeriveInputs {
        jitter: s.channel.jitter_bound,
        sender_overhead: s.channel.sender_overhead,
        guards: spec.guards,
        period: s.period,
        idle_interval: s.idle_interval,
        segments: spec.segments,
    };
    let fsm = derive_fsm_params(&profile, &s.cpu, &inputs).map_err(|e| ConfigError::invalid("fsm.derived", e))?;
    Ok(ProfileOutcome {
        iterations,
        profile,
        steady_width_ns: s.cpu.cycles_to_time(profile.steady_width()).as_nanos(),
        fsm,
    })
}

/// The monitor configuration a run will use.
pub fn resolve_fsm(s: &Scenario) -> Result<FsmConfig, ConfigError> {
    match &s.fsm {
        FsmSource::Explicit(cfg) => Ok(cfg.clone()),
        FsmSource::Derived(d) => Ok(profile_and_derive(s, d.profile_iterations)?.fsm),
    }
}
