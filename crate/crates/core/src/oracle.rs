//! Ground truth for small instances: exact evaluation of every deterministic
//! stationary policy, exhaustive trajectory trees, and a seeded generator of
//! random small LMDPs.
//!
//! All arithmetic here is rational; no tolerance enters any comparison.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::OracleError;
use crate::lex::{format_rat, lex_cmp, rat, LexVec, Rat, Scalar, Scalarity};
use crate::model::{validate_assumption2, Dynamics, EventSpec, Horizon, Lmdp, LmdpBuilder, Number, Policy};
use crate::prefs::{utility_of_seq, EventSeq};
use crate::solver::{lex_value_iteration, SolverConfig};

/// Largest number of deterministic policies the oracle will enumerate.
pub const POLICY_LIMIT: u128 = 100_000;
/// Largest number of trajectory-tree leaves.
pub const LEAF_LIMIT: u128 = 1_000_000;

/// Solves `a x = b` by Gauss-Jordan elimination; `None` if `a` is singular.
pub fn solve_linear(mut a: Vec<Vec<Rat>>, mut b: Vec<Rat>) -> Option<Vec<Rat>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for x in &mut a[col][col..] {
            *x = &*x * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            let pivot_row = a[col].clone();
            for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= &f * p;
            }
            let delta = &f * &b[col];
            b[r] -= delta;
        }
    }
    Some(b)
}

/// Exact `Q^π` of a deterministic stationary policy, `q[s][i]` per local
/// action `i`, or `None` when some dimension's evaluation system is
/// singular (possible only when a diagonal reaches one).
pub fn exact_policy_q(m: &Lmdp, dy: &Dynamics<Rat>, policy: &[usize]) -> Option<Vec<Vec<LexVec<Rat>>>> {
    let n = dy.n_states();
    let nm = dy.n_model_states;
    let local: Vec<usize> = (0..n)
        .map(|s| {
            if s < nm {
                m.local_action(s, policy[s]).expect("available action")
            } else {
                0
            }
        })
        .collect();
    let d = dy.d;
    let mut values: Vec<Vec<Rat>> = Vec::with_capacity(d);
    let mut q: Vec<Vec<Vec<Rat>>> = Vec::with_capacity(d);
    for k in 0..d {
        // Folded reward of every (s, a) and the diagonal transition operator.
        let folded: Vec<Vec<Rat>> = dy
            .rows
            .iter()
            .map(|per_state| {
                per_state
                    .iter()
                    .map(|row| {
                        row.iter().fold(Rat::zero(), |acc, t| {
                            let e = &dy.events[t.event];
                            let mut x = e.reward[k].clone();
                            for (j, vj) in values.iter().enumerate() {
                                x += e.multiplier.entry(k, j) * vj[t.next].clone();
                            }
                            acc + t.prob.clone() * x
                        })
                    })
                    .collect()
            })
            .collect();
        let mut a = vec![vec![Rat::zero(); n]; n];
        let mut b = vec![Rat::zero(); n];
        for s in 0..n {
            a[s][s] = Rat::one();
            for t in &dy.rows[s][local[s]] {
                a[s][t.next] -= t.prob.clone() * dy.events[t.event].multiplier.entry(k, k);
            }
            b[s] = folded[s][local[s]].clone();
        }
        let vk = solve_linear(a, b)?;
        let qk = (0..n)
            .map(|s| {
                dy.rows[s]
                    .iter()
                    .zip(&folded[s])
                    .map(|(row, r)| {
                        row.iter().fold(r.clone(), |acc, t| {
                            acc + t.prob.clone() * dy.events[t.event].multiplier.entry(k, k) * vk[t.next].clone()
                        })
                    })
                    .collect()
            })
            .collect();
        values.push(vk);
        q.push(qk);
    }
    Some(
        (0..nm)
            .map(|s| {
                (0..dy.rows[s].len())
                    .map(|a| LexVec((0..d).map(|k| q[k][s][a].clone()).collect()))
                    .collect()
            })
            .collect(),
    )
}

/// Exact finite-horizon `Q` of a stationary deterministic policy: take
/// action `a` now, then follow the policy for the remaining `T - 1` steps.
fn exact_finite_q(m: &Lmdp, dy: &Dynamics<Rat>, policy: &[usize], horizon: usize) -> Vec<Vec<LexVec<Rat>>> {
    let n = dy.n_states();
    let nm = dy.n_model_states;
    let d = dy.d;
    let q_of = |v: &[LexVec<Rat>]| -> Vec<Vec<LexVec<Rat>>> {
        (0..n)
            .map(|s| {
                dy.rows[s]
                    .iter()
                    .map(|row| {
                        row.iter().fold(LexVec::zeros(d), |acc, t| {
                            let e = &dy.events[t.event];
                            acc.add_scaled(&t.prob, &(&e.reward + &e.multiplier.apply(&v[t.next])))
                        })
                    })
                    .collect()
            })
            .collect()
    };
    let mut v = vec![LexVec::<Rat>::zeros(d); n];
    for _ in 1..horizon {
        let q = q_of(&v);
        v = (0..n)
            .map(|s| {
                let a = if s < nm {
                    m.local_action(s, policy[s]).expect("available")
                } else {
                    0
                };
                q[s][a].clone()
            })
            .collect();
    }
    let mut q = q_of(&v);
    q.truncate(nm);
    q
}

/// Result of exhaustive policy enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleVerdict {
    pub horizon: Horizon,
    /// Every deterministic stationary policy, as global action indices.
    pub policies: Vec<Vec<usize>>,
    /// Exact Q of each policy (`None`: evaluation system singular).
    pub q: Vec<Option<Vec<Vec<LexVec<Rat>>>>>,
    /// Indices into `policies` of the optimal policies: their state values
    /// `Q^π(s, π(s))` and their Q tables weakly dominate those of every other
    /// policy at every state and `(s, a)`.
    pub best_policies: Vec<usize>,
    /// Entry-wise lexicographic maximum of all defined Q tables; equals the
    /// Q of every best policy when `best_policies` is non-empty.
    pub q_best: Vec<Vec<LexVec<Rat>>>,
    /// Per-state lexicographic maximum of `Q^π(s, π(s))` over defined policies.
    pub v_best: Vec<LexVec<Rat>>,
    /// Indices of policies whose Q is undefined.
    pub undefined_policies: Vec<usize>,
    pub assumption2_holds: bool,
}

impl OracleVerdict {
    /// Per policy, per `(s, a)`: ordering of the policy's Q against `q_best`.
    pub fn dominance_table(&self) -> Vec<Option<Vec<Vec<Ordering>>>> {
        self.q
            .iter()
            .map(|q| {
                q.as_ref().map(|q| {
                    q.iter()
                        .zip(&self.q_best)
                        .map(|(row, best)| {
                            row.iter()
                                .zip(best)
                                .map(|(x, y)| lex_cmp(x, y, Scalarity::ExactRational).expect("same dimension"))
                                .collect()
                        })
                        .collect()
                })
            })
            .collect()
    }

    pub fn policy_index(&self, policy: &[usize]) -> Option<usize> {
        self.policies.iter().position(|p| p == policy)
    }

    /// Policies that pick, at every state, an action attaining the exact
    /// lexicographic maximum of `q_best(s, ·)`.
    pub fn greedy_set(&self, m: &Lmdp) -> Vec<usize> {
        let argmax: Vec<Vec<usize>> = self
            .q_best
            .iter()
            .enumerate()
            .map(|(s, row)| {
                let (best, _) = crate::lex::lex_max(row, Scalarity::ExactRational).expect("non-empty");
                row.iter()
                    .enumerate()
                    .filter(|(_, q)| **q == best)
                    .map(|(i, _)| m.available[s][i])
                    .collect()
            })
            .collect();
        self.policies
            .iter()
            .enumerate()
            .filter(|(_, p)| p.iter().enumerate().all(|(s, a)| argmax[s].contains(a)))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_json(&self, m: &Lmdp) -> Value {
        let policy_json = |p: &[usize]| Policy::Deterministic(p.to_vec()).to_json(m);
        let table = self.dominance_table();
        let glyph = |o: &Ordering| match o {
            Ordering::Less => '<',
            Ordering::Equal => '=',
            Ordering::Greater => '>',
        };
        let q_json = |q: &Vec<Vec<LexVec<Rat>>>| -> Value {
            Value::Object(
                m.states
                    .iter()
                    .enumerate()
                    .map(|(s, name)| {
                        let row: serde_json::Map<String, Value> = m.available[s]
                            .iter()
                            .zip(&q[s])
                            .map(|(a, v)| (m.actions[*a].clone(), json!(v)))
                            .collect();
                        (name.clone(), Value::Object(row))
                    })
                    .collect(),
            )
        };
        json!({
            "horizon": match self.horizon { Horizon::Infinite => json!("infinite"), Horizon::Finite(t) => json!(t) },
            "assumption2_holds": self.assumption2_holds,
            "policy_count": self.policies.len(),
            "best_policies": self.best_policies.iter().map(|&i| policy_json(&self.policies[i])).collect::<Vec<_>>(),
            "undefined_policies": self.undefined_policies.iter().map(|&i| policy_json(&self.policies[i])).collect::<Vec<_>>(),
            "q_best": q_json(&self.q_best),
            "v_best": m.states.iter().zip(&self.v_best).map(|(name, v)| (name.clone(), json!(v))).collect::<serde_json::Map<String, Value>>(),
            "dominance": self.policies.iter().zip(&table).map(|(p, row)| json!({
                "policy": policy_json(p),
                "vs_best": row.as_ref().map(|r| r.iter().map(|x| x.iter().map(glyph).collect::<String>()).collect::<Vec<_>>()),
            })).collect::<Vec<_>>(),
        })
    }
}

/// All deterministic stationary policies in mixed-radix order (the last
/// state varies fastest).
pub fn enumerate_policies(m: &Lmdp) -> Result<Vec<Vec<usize>>, OracleError> {
    let count = m.policy_count();
    if count > POLICY_LIMIT {
        return Err(OracleError::Guardrail {
            count,
            limit: POLICY_LIMIT,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; m.states.len()];
    loop {
        out.push(idx.iter().enumerate().map(|(s, &i)| m.available[s][i]).collect());
        let mut s = m.states.len();
        loop {
            if s == 0 {
                return Ok(out);
            }
            s -= 1;
            idx[s] += 1;
            if idx[s] < m.available[s].len() {
                break;
            }
            idx[s] = 0;
        }
    }
}

/// Exhaustive exact evaluation of every deterministic stationary policy.
///
/// Under the strict diagonal bound every evaluation system is nonsingular.
/// When the bound is violated, policies with singular systems are listed in
/// `undefined_policies`; since no defined policy can be certified against
/// them, `best_policies` is then empty.
pub fn enumerate_and_evaluate(m: &Lmdp, horizon: Horizon) -> Result<OracleVerdict, OracleError> {
    let policies = enumerate_policies(m)?;
    let dy: Dynamics<Rat> = m.compile();
    let assumption2_holds = validate_assumption2(m).is_clean();
    let mut q = Vec::with_capacity(policies.len());
    for p in &policies {
        let qp = match horizon {
            Horizon::Infinite => exact_policy_q(m, &dy, p),
            Horizon::Finite(0) => return Err(crate::error::SolveError::BadHorizon.into()),
            Horizon::Finite(t) => Some(exact_finite_q(m, &dy, p, t)),
        };
        if qp.is_none() && assumption2_holds {
            return Err(OracleError::Singular(p.iter().map(|&a| m.actions[a].clone()).collect()));
        }
        q.push(qp);
    }
    let undefined_policies: Vec<usize> = (0..q.len()).filter(|&i| q[i].is_none()).collect();
    let mut q_best: Option<Vec<Vec<LexVec<Rat>>>> = None;
    for qp in q.iter().flatten() {
        q_best = Some(match q_best {
            None => qp.clone(),
            Some(best) => best
                .into_iter()
                .zip(qp)
                .map(|(brow, prow)| {
                    brow.into_iter()
                        .zip(prow)
                        .map(|(b, x)| {
                            if lex_cmp(x, &b, Scalarity::ExactRational).expect("same dimension") == Ordering::Greater {
                                x.clone()
                            } else {
                                b
                            }
                        })
                        .collect()
                })
                .collect(),
        });
    }
    let q_best = q_best.unwrap_or_default();
    let state_values = |i: usize| -> Option<Vec<LexVec<Rat>>> {
        let qp = q[i].as_ref()?;
        Some(
            policies[i]
                .iter()
                .enumerate()
                .map(|(s, &a)| qp[s][m.local_action(s, a).expect("available action")].clone())
                .collect(),
        )
    };
    let mut v_best: Vec<LexVec<Rat>> = Vec::new();
    for vp in (0..q.len()).filter_map(state_values) {
        if v_best.is_empty() {
            v_best = vp;
            continue;
        }
        for (b, x) in v_best.iter_mut().zip(vp) {
            if lex_cmp(&x, b, Scalarity::ExactRational).expect("same dimension") == Ordering::Greater {
                *b = x;
            }
        }
    }
    let best_policies = if undefined_policies.is_empty() {
        (0..q.len())
            .filter(|&i| q[i].as_ref() == Some(&q_best) && state_values(i).as_ref() == Some(&v_best))
            .collect()
    } else {
        Vec::new()
    };
    Ok(OracleVerdict {
        horizon,
        policies,
        q,
        best_policies,
        q_best,
        v_best,
        undefined_policies,
        assumption2_holds,
    })
}

/// Exact finite-horizon utility from a start state.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeValue {
    pub value: LexVec<Rat>,
    /// Bound on the contribution of steps beyond the horizon:
    /// `γ^T · max|r| / (1 − γ)` with `γ` the largest diagonal; infinite when
    /// `γ ≥ 1`.
    pub truncation_bound: f64,
    pub leaves: usize,
}

/// Enumerates every event sequence of length at most `horizon` generated by
/// a deterministic policy from `s0`, and sums the sequence utilities
/// weighted by their probabilities.
pub fn trajectory_tree_value(m: &Lmdp, pi: &Policy, s0: usize, horizon: usize) -> Result<TreeValue, OracleError> {
    let Policy::Deterministic(actions) = pi else {
        return Err(crate::error::SolveError::BadPolicy("trajectory trees need a deterministic policy".into()).into());
    };
    pi.validate(m).map_err(crate::error::SolveError::BadPolicy)?;
    let max_branch = m.kernel.iter().flatten().map(Vec::len).max().unwrap_or(1).max(1) as u128;
    let bound = (0..horizon).try_fold(1u128, |acc, _| acc.checked_mul(max_branch).filter(|&x| x <= LEAF_LIMIT));
    if bound.is_none() {
        let count = max_branch.saturating_pow(horizon.min(u32::MAX as usize) as u32);
        return Err(OracleError::Guardrail {
            count,
            limit: LEAF_LIMIT,
        });
    }
    let table = m.event_table::<Rat>();
    let mut total = LexVec::zeros(m.d);
    let mut leaves = 0usize;
    // (state, sequence so far, probability)
    let mut stack: Vec<(usize, Vec<String>, Rat)> = vec![(s0, Vec::new(), Rat::one())];
    while let Some((s, seq, p)) = stack.pop() {
        let ended = seq.last().is_some_and(|id| table.is_terminal(id));
        if ended || seq.len() == horizon {
            let u = utility_of_seq(&EventSeq::raw(seq), &table).expect("known events");
            total = total.add_scaled(&p, &u);
            leaves += 1;
            continue;
        }
        let i = m.local_action(s, actions[s]).expect("validated");
        for o in &m.kernel[s][i] {
            let mut next = seq.clone();
            next.push(m.events[o.event].id.clone());
            stack.push((o.next, next, &p * &o.prob.value));
        }
    }
    let gamma = m.max_diag_overall().to_f64();
    let max_r = m
        .events
        .iter()
        .flat_map(|e| e.reward.iter().map(|x| x.value.abs().to_f64()))
        .fold(0.0, f64::max);
    let truncation_bound = if gamma >= 1.0 {
        f64::INFINITY
    } else {
        gamma.powi(horizon as i32) * max_r / (1.0 - gamma)
    };
    Ok(TreeValue {
        value: total,
        truncation_bound,
        leaves,
    })
}

/// Size and shape limits of [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceParams {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_d: usize,
    /// Diagonals are `k / 20` for `k` in `1..=max_diag_twentieths`.
    pub max_diag_twentieths: i64,
    pub max_prob_denominator: i64,
}

impl Default for InstanceParams {
    fn default() -> Self {
        InstanceParams {
            max_states: 4,
            max_actions: 3,
            max_d: 3,
            max_diag_twentieths: 19,
            max_prob_denominator: 12,
        }
    }
}

fn exact(r: Rat) -> Number {
    Number::exact(r)
}

/// A seeded random infinite-horizon LMDP with rational data. About a third
/// of first-dimension rewards are zero and some actions copy another
/// action's row, so exact ties are common.
pub fn random_instance(seed: u64, params: &InstanceParams) -> Lmdp {
    random_instance_with_d(seed, params, None)
}

/// As [`random_instance`] with the dimension fixed when `d` is given.
pub fn random_instance_with_d(seed: u64, params: &InstanceParams, d: Option<usize>) -> Lmdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=params.max_states);
    let na = rng.gen_range(1..=params.max_actions);
    let d = d.unwrap_or_else(|| rng.gen_range(1..=params.max_d));
    let n_events = rng.gen_range(2..=4);
    let mut events = Vec::with_capacity(n_events);
    for e in 0..n_events {
        let reward = (0..d)
            .map(|k| {
                if k == 0 && rng.gen_bool(1.0 / 3.0) {
                    exact(Rat::zero())
                } else {
                    exact(rat(rng.gen_range(-6..=6), rng.gen_range(1..=3)))
                }
            })
            .collect();
        let terminal = e > 0 && rng.gen_bool(0.2);
        let gamma = (!terminal).then(|| {
            (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| match i.cmp(&j) {
                            Ordering::Less => exact(Rat::zero()),
                            Ordering::Equal => exact(rat(rng.gen_range(1..=params.max_diag_twentieths), 20)),
                            Ordering::Greater => exact(rat(rng.gen_range(-4..=4), 4)),
                        })
                        .collect()
                })
                .collect()
        });
        events.push(EventSpec {
            id: format!("e{e}"),
            reward,
            gamma,
            r#unsafe: false,
        });
    }
    let mut b = LmdpBuilder::new(d, Horizon::Infinite);
    for s in 0..n {
        b.state(&format!("s{s}"));
    }
    for a in 0..na {
        b.action(&format!("a{a}"));
    }
    for e in events {
        b.event(e);
    }
    for s in 0..n {
        let mut rows: Vec<Vec<(usize, usize, Rat)>> = Vec::new();
        for _ in 0..na {
            if !rows.is_empty() && rng.gen_bool(0.15) {
                let copy = rows[rng.gen_range(0..rows.len())].clone();
                rows.push(copy);
                continue;
            }
            let den = rng.gen_range(1..=params.max_prob_denominator);
            let k = rng.gen_range(1..=den.min(3));
            // Cut `den` into `k` positive parts.
            let mut cuts: Vec<i64> = (1..den).collect();
            let mut chosen = Vec::new();
            for _ in 1..k {
                let i = rng.gen_range(0..cuts.len());
                chosen.push(cuts.remove(i));
            }
            chosen.sort_unstable();
            let mut prev = 0;
            let mut row = Vec::new();
            for c in chosen.into_iter().chain(std::iter::once(den)) {
                row.push((rng.gen_range(0..n), rng.gen_range(0..n_events), rat(c - prev, den)));
                prev = c;
            }
            rows.push(row);
        }
        for (a, row) in rows.into_iter().enumerate() {
            for (s2, e, p) in row {
                b.transition(
                    &format!("s{s}"),
                    &format!("a{a}"),
                    &format!("s{s2}"),
                    &format!("e{e}"),
                    exact(p),
                );
            }
        }
    }
    merge_duplicate_outcomes(b.build().expect("generated instances are valid"))
}

/// Rows may list the same `(s', e)` twice; merge them for a canonical form.
fn merge_duplicate_outcomes(mut m: Lmdp) -> Lmdp {
    for per_state in &mut m.kernel {
        for row in per_state {
            let mut merged: Vec<crate::model::Outcome> = Vec::new();
            for o in row.drain(..) {
                match merged.iter_mut().find(|x| x.next == o.next && x.event == o.event) {
                    Some(x) => x.prob = Number::exact(&x.prob.value + &o.prob.value),
                    None => merged.push(o),
                }
            }
            *row = merged;
        }
    }
    m
}

/// Text form of an exact vector, for messages.
pub fn format_lexvec(v: &LexVec<Rat>) -> String {
    let parts: Vec<String> = v.0.iter().map(format_rat).collect();
    format!("({})", parts.join(", "))
}

/// Result of cross-checking the solver against the oracle on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceCheck {
    pub seed: u64,
    pub states: usize,
    pub actions: usize,
    pub d: usize,
    pub policies: usize,
    /// Largest `|Q* − Q_best|` as a fraction of the allowed tolerance.
    pub gap_ratio: f64,
    /// Every disagreement found; empty iff the instance passes.
    pub issues: Vec<String>,
}

impl InstanceCheck {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

/// All deterministic policies choosing from `sets[s]` at every state `s`.
pub fn selections(sets: &[Vec<usize>]) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::from([Vec::new()]);
    for set in sets {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                set.iter().map(move |&a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

/// Solves `m` and compares the result with exhaustive exact evaluation:
/// the greedy policy must weakly dominate every policy at every `(s, a)`,
/// `Q*` must lie within `value_tol · (1 + 1/(1 − max diag))` of `Q_best`,
/// and the certified optimal set must equal both the exact lex-argmax
/// selections and the solver's final restricted action sets.
pub fn check_instance(seed: u64, m: &Lmdp, cfg: &SolverConfig) -> Result<InstanceCheck, OracleError> {
    let report = lex_value_iteration(m, cfg)?;
    let verdict = enumerate_and_evaluate(m, Horizon::Infinite)?;
    let mut issues = Vec::new();
    let Policy::Deterministic(greedy) = &report.policy else {
        unreachable!("the solver returns deterministic policies")
    };
    let idx = verdict
        .policy_index(greedy)
        .expect("every deterministic policy is enumerated");
    let q_greedy = verdict.q[idx].as_ref().expect("defined under the diagonal bound");
    for (qp, p) in verdict.q.iter().zip(&verdict.policies) {
        let qp = qp.as_ref().expect("defined under the diagonal bound");
        let loses = q_greedy.iter().zip(qp).enumerate().find_map(|(s, (grow, prow))| {
            grow.iter()
                .zip(prow)
                .position(|(g, x)| lex_cmp(g, x, Scalarity::ExactRational).expect("same dimension") == Ordering::Less)
                .map(|a| (s, a))
        });
        if let Some((s, a)) = loses {
            issues.push(format!(
                "greedy policy loses to {:?} at ({}, {})",
                p.iter().map(|&x| &m.actions[x]).collect::<Vec<_>>(),
                m.states[s],
                m.actions[m.available[s][a]]
            ));
        }
    }
    let tol = cfg.value_tol * (1.0 + 1.0 / (1.0 - m.max_diag_overall().to_f64()));
    let mut gap_ratio = 0.0f64;
    for (s, (srow, brow)) in report.q_star.iter().zip(&verdict.q_best).enumerate() {
        for (a, (q, best)) in srow.iter().zip(brow).enumerate() {
            let gap = q.max_abs_diff(&best.to_f64());
            gap_ratio = gap_ratio.max(gap / tol);
            if gap > tol {
                issues.push(format!(
                    "|Q* - Q_best| = {gap:e} exceeds {tol:e} at ({}, {})",
                    m.states[s], m.actions[m.available[s][a]]
                ));
            }
        }
    }
    let certified: BTreeSet<Vec<usize>> = verdict
        .best_policies
        .iter()
        .map(|&i| verdict.policies[i].clone())
        .collect();
    let exact_greedy: BTreeSet<Vec<usize>> = verdict
        .greedy_set(m)
        .into_iter()
        .map(|i| verdict.policies[i].clone())
        .collect();
    let solver_greedy = selections(&report.restricted_actions[report.d()]);
    if certified.is_empty() {
        issues.push("no policy is certified optimal".into());
    }
    if certified != exact_greedy {
        issues.push(format!(
            "certified set {certified:?} differs from exact lex-argmax selections {exact_greedy:?}"
        ));
    }
    if certified != solver_greedy {
        issues.push(format!(
            "certified set {certified:?} differs from solver argmax selections {solver_greedy:?}"
        ));
    }
    Ok(InstanceCheck {
        seed,
        states: m.states.len(),
        actions: m.actions.len(),
        d: m.d,
        policies: verdict.policies.len(),
        gap_ratio,
        issues,
    })
}

/// Seed of the `i`-th instance of a suite started from `seed`.
pub fn trial_seed(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(i)
}

/// [`check_instance`] over `trials` seeded random instances.
pub fn verify_suite(
    trials: u64,
    seed: u64,
    params: &InstanceParams,
    cfg: &SolverConfig,
) -> Result<Vec<InstanceCheck>, OracleError> {
    (0..trials)
        .map(|i| {
            let s = trial_seed(seed, i);
            check_instance(s, &random_instance(s, params), cfg)
        })
        .collect()
}
