//! Optimal policies for LMDPs.
//!
//! [`lex_value_iteration`] solves one dimension at a time. Dimension `k`
//! folds the already-solved lower dimensions into its reward,
//! `r̂_k(s,a) = Σ P(s',e|s,a) [r_k(e) + Σ_{j<k} Γ_kj(e) V_j*(s')]`, then runs
//! value iteration with modulus `max_e Γ_kk(e)` over the actions that
//! survived dimensions `1..k`. The surviving set for the next dimension is
//! the `tie_epsilon`-argmax of `Q_k`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::SolveError;
use crate::lex::{lex_max, LexVec, Scalar, Scalarity};
use crate::model::{validate_assumption2, Dynamics, Lmdp, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target sup-norm error of every value table.
    pub value_tol: f64,
    /// Tie tolerance for action-set restriction and greedy selection.
    pub tie_epsilon: f64,
    pub max_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            value_tol: 1e-9,
            tie_epsilon: 1e-7,
            max_sweeps: 100_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.value_tol) {
            return Err(SolveError::BadConfig(format!(
                "value_tol must be positive, got {}",
                self.value_tol
            )));
        }
        if !ok(self.tie_epsilon) {
            return Err(SolveError::BadConfig(format!(
                "tie_epsilon must be positive, got {}",
                self.tie_epsilon
            )));
        }
        if self.max_sweeps == 0 {
            return Err(SolveError::BadConfig("max_sweeps must be positive".into()));
        }
        Ok(())
    }

    pub fn scalarity(&self) -> Scalarity {
        Scalarity::Float {
            tie_epsilon: self.tie_epsilon,
        }
    }
}

/// Convergence record of one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionTrace {
    pub sweeps: usize,
    /// Final sup-norm change between consecutive sweeps.
    pub residual: f64,
    /// `max_e Γ_kk(e)`, the contraction modulus of this dimension.
    pub modulus: f64,
    /// Residual after every sweep.
    pub history: Vec<f64>,
}

/// Output of [`lex_value_iteration`]. Tables are indexed by model state and
/// by position in `available[s]`; the internal terminal sink is not listed.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub config: SolverConfig,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub available: Vec<Vec<usize>>,
    pub v_star: Vec<LexVec>,
    pub q_star: Vec<Vec<LexVec>>,
    /// `restricted_actions[k][s]`: global action indices of `A_{k+1}(s)`;
    /// level 0 is every available action, level `d` the final set.
    pub restricted_actions: Vec<Vec<Vec<usize>>>,
    pub policy: Policy,
    pub traces: Vec<DimensionTrace>,
}

impl SolveReport {
    pub fn d(&self) -> usize {
        self.traces.len()
    }

    pub fn sweeps(&self) -> Vec<usize> {
        self.traces.iter().map(|t| t.sweeps).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.traces.iter().map(|t| t.residual).collect()
    }

    /// `Q*(s, a)` by global action index.
    pub fn q(&self, s: usize, a: usize) -> Option<&LexVec> {
        let i = self.available[s].iter().position(|&x| x == a)?;
        Some(&self.q_star[s][i])
    }

    pub fn to_json(&self) -> Value {
        let name = |a: &usize| self.actions[*a].clone();
        let per_state = |f: &dyn Fn(usize) -> Value| -> Value {
            Value::Object(self.states.iter().enumerate().map(|(s, n)| (n.clone(), f(s))).collect())
        };
        let values = per_state(&|s| json!(self.v_star[s]));
        let q = per_state(&|s| {
            Value::Object(
                self.available[s]
                    .iter()
                    .zip(&self.q_star[s])
                    .map(|(a, v)| (name(a), json!(v)))
                    .collect(),
            )
        });
        let restricted: Vec<Value> = self
            .restricted_actions
            .iter()
            .map(|level| per_state(&|s| json!(level[s].iter().map(name).collect::<Vec<_>>())))
            .collect();
        let policy = match &self.policy {
            Policy::Deterministic(a) => per_state(&|s| json!(self.actions[a[s]])),
            Policy::Randomized(_) => Value::Null,
        };
        json!({
            "config": self.config,
            "values": values,
            "q": q,
            "restricted_actions": restricted,
            "policy": policy,
            "sweeps": self.sweeps(),
            "residuals": self.residuals(),
            "dimensions": self.traces,
        })
    }
}

/// Dense `f64` copy of the per-event coefficients.
struct Coefficients {
    reward: Vec<Vec<f64>>,
    gamma: Vec<Vec<Vec<f64>>>,
}

impl Coefficients {
    fn new(dy: &Dynamics<f64>) -> Self {
        let d = dy.d;
        Coefficients {
            reward: dy.events.iter().map(|e| e.reward.0.clone()).collect(),
            gamma: dy
                .events
                .iter()
                .map(|e| {
                    (0..d)
                        .map(|i| (0..d).map(|j| e.multiplier.entry(i, j)).collect())
                        .collect()
                })
                .collect(),
        }
    }

    /// `max_e Σ_{j<k} |Γ_kj(e)|`.
    fn coupling(&self, k: usize) -> f64 {
        self.gamma
            .iter()
            .map(|g| g[k][..k].iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn modulus(&self, k: usize) -> f64 {
        self.gamma.iter().map(|g| g[k][k]).fold(0.0, f64::max)
    }
}

/// Residual below which dimension `k` stops, chosen so that after error
/// propagation through the folded rewards every `V_k` is within
/// `value_tol` of its fixed point.
fn stopping_threshold(coef: &Coefficients, d: usize, k: usize, value_tol: f64) -> f64 {
    let gamma = coef.modulus(k);
    if gamma == 0.0 {
        return f64::INFINITY;
    }
    let amplification: f64 = (k + 1..d)
        .map(|j| 1.0 + coef.coupling(j) / (1.0 - coef.modulus(j)))
        .product();
    value_tol * (1.0 - gamma) / (gamma * d as f64 * amplification)
}

/// Folded one-step rewards `r̂_k(s, a)` for every state and local action.
fn folded_rewards(dy: &Dynamics<f64>, coef: &Coefficients, k: usize, lower: &[Vec<f64>]) -> Vec<Vec<f64>> {
    dy.rows
        .iter()
        .map(|per_state| {
            per_state
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|t| {
                            let g = &coef.gamma[t.event][k];
                            let carried: f64 = (0..k).map(|j| g[j] * lower[j][t.next]).sum();
                            t.prob * (coef.reward[t.event][k] + carried)
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// `Q_k(s, a) = r̂_k(s, a) + Σ P Γ_kk(e) V_k(s')` for every local action.
fn q_row(dy: &Dynamics<f64>, coef: &Coefficients, k: usize, folded: &[f64], s: usize, v: &[f64]) -> Vec<f64> {
    dy.rows[s]
        .iter()
        .zip(folded)
        .map(|(row, r)| {
            r + row
                .iter()
                .map(|t| t.prob * coef.gamma[t.event][k][k] * v[t.next])
                .sum::<f64>()
        })
        .collect()
}

/// Synchronous value iteration on one dimension. `backup` maps a state and
/// its Q row to the new value.
fn iterate_dimension(
    dy: &Dynamics<f64>,
    coef: &Coefficients,
    k: usize,
    folded: &[Vec<f64>],
    cfg: &SolverConfig,
    backup: impl Fn(usize, &[f64]) -> f64,
) -> Result<(Vec<f64>, DimensionTrace), SolveError> {
    let n = dy.n_states();
    let threshold = stopping_threshold(coef, dy.d, k, cfg.value_tol);
    let mut v = vec![0.0; n];
    let mut history = Vec::new();
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| backup(s, &q_row(dy, coef, k, &folded[s], s, &v)))
            .collect();
        let residual = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        let stagnated = history
            .last()
            .is_some_and(|&prev| residual <= cfg.value_tol && residual >= prev);
        history.push(residual);
        if residual <= threshold || stagnated {
            break;
        }
        if history.len() >= cfg.max_sweeps {
            if residual <= cfg.value_tol {
                break;
            }
            return Err(SolveError::NonConvergence {
                dim: k + 1,
                sweeps: history.len(),
                residual,
            });
        }
    }
    let trace = DimensionTrace {
        sweeps: history.len(),
        residual: *history.last().expect("at least one sweep"),
        modulus: coef.modulus(k),
        history,
    };
    Ok((v, trace))
}

fn check_assumption2(m: &Lmdp) -> Result<(), SolveError> {
    let diag = validate_assumption2(m);
    if diag.is_clean() {
        Ok(())
    } else {
        Err(SolveError::Assumption2(diag.violations.len()))
    }
}

/// Dimension-wise lexicographic value iteration (infinite horizon).
pub fn lex_value_iteration(m: &Lmdp, cfg: &SolverConfig) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    check_assumption2(m)?;
    let dy: Dynamics<f64> = m.compile();
    let coef = Coefficients::new(&dy);
    let n = dy.n_states();
    let d = dy.d;

    // Local action indices surviving so far.
    let mut allowed: Vec<Vec<usize>> = dy.rows.iter().map(|r| (0..r.len()).collect()).collect();
    let mut levels = vec![allowed.clone()];
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut q: Vec<Vec<Vec<f64>>> = Vec::with_capacity(d);
    let mut traces = Vec::with_capacity(d);
    for k in 0..d {
        let folded = folded_rewards(&dy, &coef, k, &values);
        let (v, trace) = iterate_dimension(&dy, &coef, k, &folded, cfg, |s, row| {
            allowed[s].iter().map(|&a| row[a]).fold(f64::NEG_INFINITY, f64::max)
        })?;
        let qk: Vec<Vec<f64>> = (0..n).map(|s| q_row(&dy, &coef, k, &folded[s], s, &v)).collect();
        for s in 0..n {
            let best = allowed[s].iter().map(|&a| qk[s][a]).fold(f64::NEG_INFINITY, f64::max);
            allowed[s].retain(|&a| qk[s][a] >= best - cfg.tie_epsilon);
        }
        levels.push(allowed.clone());
        values.push(v);
        q.push(qk);
        traces.push(trace);
    }

    let nm = dy.n_model_states;
    let v_star: Vec<LexVec> = (0..nm)
        .map(|s| LexVec((0..d).map(|k| values[k][s]).collect()))
        .collect();
    let q_star: Vec<Vec<LexVec>> = (0..nm)
        .map(|s| {
            (0..dy.rows[s].len())
                .map(|a| LexVec((0..d).map(|k| q[k][s][a]).collect()))
                .collect()
        })
        .collect();
    let restricted_actions = levels
        .iter()
        .map(|level| {
            (0..nm)
                .map(|s| level[s].iter().map(|&a| m.available[s][a]).collect())
                .collect()
        })
        .collect();
    let mut report = SolveReport {
        config: *cfg,
        states: m.states.clone(),
        actions: m.actions.clone(),
        available: m.available.clone(),
        v_star,
        q_star,
        restricted_actions,
        policy: Policy::Deterministic(Vec::new()),
        traces,
    };
    report.policy = greedy_policy(&report, cfg.scalarity());
    Ok(report)
}

/// Deterministic policy choosing the lexicographic maximum of `Q*(s, ·)`;
/// ties go to the action listed first in the model.
pub fn greedy_policy(report: &SolveReport, s: Scalarity) -> Policy {
    Policy::Deterministic(
        report
            .q_star
            .iter()
            .enumerate()
            .map(|(st, row)| {
                let (_, tied) = lex_max(row, s).expect("every state has an action");
                report.available[st][tied[0]]
            })
            .collect(),
    )
}

/// Exact-free evaluation of a stationary policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValues {
    pub v: Vec<LexVec>,
    /// `q[s][i]` for local action `i` at `s`.
    pub q: Vec<Vec<LexVec>>,
    pub traces: Vec<DimensionTrace>,
}

/// Dimension-wise evaluation of `pi`: dimension `k` uses `V_j^π`, `j < k`,
/// in its folded reward.
pub fn policy_evaluation(m: &Lmdp, pi: &Policy, cfg: &SolverConfig) -> Result<PolicyValues, SolveError> {
    cfg.validate()?;
    check_assumption2(m)?;
    pi.validate(m).map_err(SolveError::BadPolicy)?;
    let dy: Dynamics<f64> = m.compile();
    let coef = Coefficients::new(&dy);
    let n = dy.n_states();
    let nm = dy.n_model_states;
    // Local-index weights per state; the sink takes its only action.
    let weights: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|s| {
            if s >= nm {
                vec![(0, 1.0)]
            } else {
                pi.weights(s)
                    .into_iter()
                    .map(|(a, p)| (m.local_action(s, a).expect("validated"), p))
                    .collect()
            }
        })
        .collect();
    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut q: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut traces = Vec::new();
    for k in 0..dy.d {
        let folded = folded_rewards(&dy, &coef, k, &values);
        let (v, trace) = iterate_dimension(&dy, &coef, k, &folded, cfg, |s, row| {
            weights[s].iter().map(|&(a, p)| p * row[a]).sum()
        })?;
        q.push((0..n).map(|s| q_row(&dy, &coef, k, &folded[s], s, &v)).collect());
        values.push(v);
        traces.push(trace);
    }
    let d = dy.d;
    Ok(PolicyValues {
        v: (0..nm)
            .map(|s| LexVec((0..d).map(|k| values[k][s]).collect()))
            .collect(),
        q: (0..nm)
            .map(|s| {
                (0..dy.rows[s].len())
                    .map(|a| LexVec((0..d).map(|k| q[k][s][a]).collect()))
                    .collect()
            })
            .collect(),
        traces,
    })
}

/// Backward-induction output. `values[t][s]` is `V_t(s)` for `t = 0..=T`
/// (`values[T]` is the terminal value), `q[t][s][i]` the step-`t` Q of local
/// action `i`, and `policy[t][s]` the chosen global action.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHorizonSolution<T> {
    pub values: Vec<Vec<LexVec<T>>>,
    pub q: Vec<Vec<Vec<LexVec<T>>>>,
    pub policy: Vec<Vec<usize>>,
}

impl<T: Scalar> FiniteHorizonSolution<T> {
    pub fn horizon(&self) -> usize {
        self.policy.len()
    }
}

/// Backward induction `V_t(s) = lex_max_a Σ P(s',e|s,a)[r(e) + Γ(e)V_{t+1}(s')]`
/// from `V_T = terminal` (zero when `None`). Diagonals equal to one are
/// allowed. Ties go to the action listed first in the model.
pub fn finite_horizon_solve<T: Scalar>(
    m: &Lmdp,
    horizon: usize,
    s: Scalarity,
    terminal: Option<&[LexVec<T>]>,
) -> Result<FiniteHorizonSolution<T>, SolveError> {
    if horizon == 0 {
        return Err(SolveError::BadHorizon);
    }
    let dy: Dynamics<T> = m.compile();
    let nm = dy.n_model_states;
    let n = dy.n_states();
    let d = dy.d;
    let mut next: Vec<LexVec<T>> = match terminal {
        Some(tv) => {
            if tv.len() != nm || tv.iter().any(|v| v.dim() != d) {
                return Err(SolveError::BadConfig(format!(
                    "terminal value must give a {d}-vector for each of the {nm} states"
                )));
            }
            let mut v = tv.to_vec();
            v.resize(n, LexVec::zeros(d));
            v
        }
        None => vec![LexVec::zeros(d); n],
    };
    let mut values = vec![next[..nm].to_vec()];
    let mut qs = Vec::with_capacity(horizon);
    let mut policy = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let q: Vec<Vec<LexVec<T>>> = (0..n)
            .map(|st| {
                dy.rows[st]
                    .iter()
                    .map(|row| {
                        row.iter().fold(LexVec::zeros(d), |acc, t| {
                            let e = &dy.events[t.event];
                            let u = &e.reward + &e.multiplier.apply(&next[t.next]);
                            acc.add_scaled(&t.prob, &u)
                        })
                    })
                    .collect()
            })
            .collect();
        let mut cur = Vec::with_capacity(n);
        let mut step_policy = Vec::with_capacity(nm);
        for (st, row) in q.iter().enumerate() {
            let (best, tied) = lex_max(row, s).expect("every state has an action");
            if st < nm {
                step_policy.push(m.available[st][tied[0]]);
            }
            cur.push(best);
        }
        values.push(cur[..nm].to_vec());
        qs.push(q[..nm].to_vec());
        policy.push(step_policy);
        next = cur;
    }
    values.reverse();
    qs.reverse();
    policy.reverse();
    Ok(FiniteHorizonSolution { values, q: qs, policy })
}

/// Evaluates a nonstationary deterministic policy (`policy[t][s]`, global
/// action indices) by backward recursion over `policy.len()` steps.
pub fn finite_horizon_evaluate<T: Scalar>(m: &Lmdp, policy: &[Vec<usize>]) -> Result<Vec<Vec<LexVec<T>>>, SolveError> {
    if policy.is_empty() {
        return Err(SolveError::BadHorizon);
    }
    let dy: Dynamics<T> = m.compile();
    let nm = dy.n_model_states;
    let n = dy.n_states();
    let d = dy.d;
    let mut next = vec![LexVec::<T>::zeros(d); n];
    let mut values = vec![next[..nm].to_vec()];
    for step in policy.iter().rev() {
        if step.len() != nm {
            return Err(SolveError::BadPolicy(format!(
                "step covers {} states, model has {nm}",
                step.len()
            )));
        }
        let cur: Vec<LexVec<T>> = (0..n)
            .map(|st| {
                let local = if st < nm {
                    m.local_action(st, step[st])
                        .ok_or_else(|| SolveError::BadPolicy(format!("unavailable action at {:?}", m.states[st])))?
                } else {
                    0
                };
                Ok(dy.rows[st][local].iter().fold(LexVec::zeros(d), |acc, t| {
                    let e = &dy.events[t.event];
                    acc.add_scaled(&t.prob, &(&e.reward + &e.multiplier.apply(&next[t.next])))
                }))
            })
            .collect::<Result<_, SolveError>>()?;
        values.push(cur[..nm].to_vec());
        next = cur;
    }
    values.reverse();
    Ok(values)
}

/// Ordering of two value tables state by state (used by reports and tests).
pub fn compare_tables(a: &[LexVec], b: &[LexVec], s: Scalarity) -> Vec<Ordering> {
    a.iter()
        .zip(b)
        .map(|(x, y)| crate::lex::lex_cmp(x, y, s).expect("same dimension"))
        .collect()
}
