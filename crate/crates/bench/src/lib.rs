//! Shared fixtures for the benchmark targets.

use phidelta_core::cluster::{ClusterPlan, EpsilonPolicy};
use phidelta_core::model::{build_scenario, Family, ProblemInstance, ScenarioSpec};

/// The reference-scale two-group scenario (32 hypotheses, 16 actions).
pub fn scenario(family: Family) -> ProblemInstance {
    build_scenario(&ScenarioSpec::reference_scale(family, 7)).expect("valid scenario")
}

/// Fixed-ε plan matching the reference experiments.
pub fn plan(inst: &ProblemInstance) -> ClusterPlan {
    ClusterPlan::build(inst, &EpsilonPolicy::Fixed { value: 0.4 }).expect("plan builds")
}
