//! Shared fixtures for the benchmarks.

use drmcost_core::{execute_scenario, OpTrace, Scenario};

/// Metered trace of a built-in run at a fixed seed.
pub fn scenario_trace(scenario: &Scenario) -> OpTrace {
    execute_scenario(scenario, 1).expect("built-in scenario runs").trace
}

/// Deterministic filler bytes.
pub fn filler(len: usize) -> Vec<u8> {
    (0..len).map(|i| (i as u8).wrapping_mul(31).wrapping_add(7)).collect()
}
