//! Benchmark fixtures shared by the criterion targets.

use cpmle_core::simulation::two_segment_normal_scenario;
use cpmle_core::{generate, Dataset, ModelSpec, ScenarioSpec};

/// Two-segment common-variance scenario with a 2-sigma shift.
pub fn shift_scenario(n: usize) -> ScenarioSpec {
    two_segment_normal_scenario(2.0, true, vec![n], 1, 0xBE).expect("valid scenario")
}

/// One generated dataset plus its model.
pub fn shift_instance(n: usize) -> (ModelSpec, Dataset) {
    let scenario = shift_scenario(n);
    let data = generate(&scenario, n, 0).expect("generation succeeds");
    (scenario.spec, data)
}
