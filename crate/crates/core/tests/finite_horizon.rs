//! Backward induction against exhaustive trajectory-tree enumeration.

use std::cmp::Ordering;

use lexmdp::lex::Rat;
use lexmdp::oracle::{enumerate_policies, random_instance, InstanceParams};
use lexmdp::solver::finite_horizon_evaluate;
use lexmdp::{finite_horizon_solve, lex_cmp, trajectory_tree_value, Policy, Scalarity};

#[test]
fn induction_matches_tree_enumeration_exactly() {
    let params = InstanceParams {
        max_states: 5,
        ..InstanceParams::default()
    };
    let mut compared = 0;
    for seed in 0..40 {
        let m = random_instance(seed, &params);
        let horizon = 1 + (seed as usize % 4);
        let best = finite_horizon_solve::<Rat>(&m, horizon, Scalarity::ExactRational, None).unwrap();
        for p in enumerate_policies(&m).unwrap().into_iter().take(30) {
            let by_induction = finite_horizon_evaluate::<Rat>(&m, &vec![p.clone(); horizon]).unwrap();
            let pi = Policy::Deterministic(p);
            for (s, (induced, optimal)) in by_induction[0].iter().zip(&best.values[0]).enumerate() {
                let tree = trajectory_tree_value(&m, &pi, s, horizon).unwrap();
                assert_eq!(&tree.value, induced, "seed {seed} state {s}");
                let order = lex_cmp(optimal, &tree.value, Scalarity::ExactRational).unwrap();
                assert_ne!(order, Ordering::Less, "seed {seed} state {s}: induction is not optimal");
                compared += 1;
            }
        }
    }
    assert!(compared > 500, "{compared}");
}
