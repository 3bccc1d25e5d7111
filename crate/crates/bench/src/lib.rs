//! Benchmark workloads: seeded model families shared by the criterion
//! benches and their smoke tests.

use lexmdp::oracle::{random_instance_with_d, InstanceParams};
use lexmdp::Lmdp;

/// Seed used for every workload so runs are comparable.
pub const SEED: u64 = 0x5eed;

/// A random infinite-horizon model with up to `states` states, `actions`
/// actions and exactly `d` dimensions.
pub fn random_model(states: usize, actions: usize, d: usize) -> Lmdp {
    let params = InstanceParams {
        max_states: states,
        max_actions: actions,
        max_d: d,
        ..InstanceParams::default()
    };
    random_instance_with_d(SEED, &params, Some(d))
}

/// Models for the value-iteration scaling benchmark, labelled by their
/// state bound and dimension.
pub fn solver_workloads() -> Vec<(String, Lmdp)> {
    [(8, 1), (8, 3), (32, 3), (128, 3), (32, 6)]
        .into_iter()
        .map(|(n, d)| (format!("n{n}_d{d}"), random_model(n, 4, d)))
        .collect()
}

/// Models small enough for exhaustive policy enumeration.
pub fn oracle_workloads() -> Vec<(String, Lmdp)> {
    [(3, 2), (4, 3)]
        .into_iter()
        .map(|(n, a)| (format!("n{n}_a{a}"), random_model(n, a, 3)))
        .collect()
}
