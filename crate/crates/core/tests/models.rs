//! End-to-end checks on the bundled model files.

use std::path::PathBuf;

use lexmdp::lex::{rat, LexVec, Rat};
use lexmdp::model::from_json_value;
use lexmdp::oracle::{enumerate_and_evaluate, random_instance, InstanceParams};
use lexmdp::{
    finite_horizon_solve, lex_value_iteration, load_model, Horizon, ModelError, Policy, Scalarity, SolverConfig,
};

fn read(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/models").join(name);
    std::fs::read(path).unwrap()
}

#[test]
fn golden_value_matches_closed_form() {
    let m = load_model(&read("golden.json")).unwrap();
    let report = lex_value_iteration(&m, &SolverConfig::default()).unwrap();
    for v in &report.v_star {
        assert!((v[0] - 10.0).abs() < 1e-9, "{v}");
    }
    let verdict = enumerate_and_evaluate(&m, Horizon::Infinite).unwrap();
    // The float literal 0.9 is taken at its binary value.
    let gamma = Rat::from_float(0.9).unwrap();
    let exact = Rat::from_integer(1.into()) / (Rat::from_integer(1.into()) - gamma);
    assert_eq!(verdict.q_best[0][0], LexVec(vec![exact]));
}

#[test]
fn two_objective_model_prefers_the_first_dimension() {
    let m = load_model(&read("two_objectives.json")).unwrap();
    let report = lex_value_iteration(&m, &SolverConfig::default()).unwrap();
    assert_eq!(report.policy, Policy::Deterministic(vec![0, 0]));
    assert_eq!(report.restricted_actions[1], vec![vec![0], vec![0]]);
    let verdict = enumerate_and_evaluate(&m, Horizon::Infinite).unwrap();
    assert_eq!(verdict.best_policies.len(), 1);
    assert_eq!(verdict.policies[verdict.best_policies[0]], vec![0, 0]);
    // x forever: (2, 0); the second dimension is never rewarded.
    assert_eq!(verdict.v_best[0], LexVec(vec![rat(2, 1), rat(0, 1)]));
}

#[test]
fn safe_route_trades_reward_for_safety() {
    let m = load_model(&read("safe_route.json")).unwrap();
    assert_eq!(m.d, 2);
    let Horizon::Finite(t) = m.horizon else {
        panic!("finite model")
    };
    let sol = finite_horizon_solve::<Rat>(&m, t, Scalarity::ExactRational, None).unwrap();
    let start = m.state_index("start").unwrap();
    assert_eq!(m.actions[sol.policy[0][start]], "long");
    // Zero unsafe mass; arrival within five road steps has mass 31/32.
    assert_eq!(sol.values[0][start], LexVec(vec![rat(0, 1), rat(10, 1) * rat(31, 32)]));
    let verdict = enumerate_and_evaluate(&m, Horizon::Finite(t)).unwrap();
    let best: Vec<&Vec<usize>> = verdict.best_policies.iter().map(|&i| &verdict.policies[i]).collect();
    assert!(best.iter().all(|p| m.actions[p[start]] == "long"));
}

#[test]
fn invalid_mass_is_diagnosed() {
    match load_model(&read("short_mass.json")) {
        Err(ModelError::Invalid(d)) => assert_eq!(d.violations[0].rule, "probability-mass"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn serialised_models_reload_identically() {
    for name in ["golden.json", "two_objectives.json", "safe_route.json"] {
        let m = load_model(&read(name)).unwrap();
        let again = from_json_value(&m.to_json()).unwrap();
        assert_eq!(m, again, "{name}");
    }
    for seed in 0..20 {
        let m = random_instance(seed, &InstanceParams::default());
        assert_eq!(from_json_value(&m.to_json()).unwrap(), m);
    }
}

#[test]
fn policies_round_trip_through_json() {
    let m = load_model(&read("two_objectives.json")).unwrap();
    let det = Policy::Deterministic(vec![1, 0]);
    assert_eq!(Policy::from_json(&det.to_json(&m), &m).unwrap(), det);
    let rnd = Policy::Randomized(vec![vec![(0, 0.25), (1, 0.75)], vec![(1, 1.0)]]);
    assert_eq!(Policy::from_json(&rnd.to_json(&m), &m).unwrap(), rnd);
}
