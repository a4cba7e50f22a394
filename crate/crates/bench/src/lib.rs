//! Shared fixtures for the propagation benchmarks.

use rydgate::params::load_setting;
use rydgate::{GateSimulator, PulseKind, SequenceSpec};

/// Simulator for a builtin setting with default tolerances.
pub fn simulator(setting: &str) -> GateSimulator {
    GateSimulator::new(&load_setting(setting).expect("builtin setting")).expect("valid setting")
}

/// DRAG sequence with τ_c = τ_t/2 and the given target detuning (rad/ns).
pub fn drag_sequence(tau_t: f64, lambda: f64) -> SequenceSpec {
    SequenceSpec::new(tau_t, PulseKind::Drag).with_lambda_target(lambda)
}
