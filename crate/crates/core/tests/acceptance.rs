//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary so the lines are always visible in `cargo test` output.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lexmdp::compare::{
    emit_frontier, enumerate_paths, lambda_star, solve_constrained, solve_lexicographic, solve_penalty,
    solve_penalty_exact, PathInstance, DEFAULT_LAMBDAS,
};
use lexmdp::fig1::{solve_fig1, Fig1Params, DEFAULT_HORIZON, GREEN, RED, REWARD_RANGE};
use lexmdp::lex::{lex_cmp, rat, LexVec, Matrix, Multiplier, Rat, Scalar, Scalarity};
use lexmdp::model::{Dynamics, Lmdp, Number, Policy};
use lexmdp::oracle::{enumerate_and_evaluate, random_instance, random_instance_with_d, selections, InstanceParams};
use lexmdp::prefs::axioms::{check_axiom, Axiom, AxiomParams, DiscountedUtility, LotterySampler, SeqUtility};
use lexmdp::prefs::{
    compare_by_lemma, concat, lift_single_unsafe, mix, safety_decompose, single_unsafe_lottery_utility,
    single_unsafe_recursion, utility_of_lottery, utility_of_seq, Event, EventSeq, EventTable, Lottery, ScalarEvent,
};
use lexmdp::solver::{lex_value_iteration, SolveReport, SolverConfig};
use lexmdp::Horizon;

/// Random instances for the oracle criteria.
const ORACLE_INSTANCES: u64 = 200;
/// Sampled cases per property suite.
const PROPERTY_CASES: usize = 10_000;
/// Instances for the scaling and scalar-regression criteria.
const SMALL_SUITE: u64 = 50;
/// Slack on measured residual ratios beyond the contraction modulus.
const CONTRACTION_SLACK: f64 = 1e-9;
/// Floating-point allowance on a residual, relative to the value scale.
const ROUNDING_SLACK: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: &[String], ok_detail: String) -> Outcome {
    if failures.is_empty() {
        Outcome {
            pass: true,
            detail: ok_detail,
        }
    } else {
        let shown: Vec<&str> = failures.iter().take(5).map(String::as_str).collect();
        Outcome {
            pass: false,
            detail: format!("{} failure(s): {}", failures.len(), shown.join("; ")),
        }
    }
}

fn r(a: i64, b: i64) -> Rat {
    rat(a, b)
}

fn seq(ids: &[&str]) -> EventSeq {
    EventSeq::raw(ids.iter().copied())
}

fn within(elapsed: Duration, limit: Duration, what: &str, failures: &mut Vec<String>) {
    if elapsed >= limit {
        failures.push(format!("{what} took {elapsed:?}, limit {limit:?}"));
    }
}

// ---------------------------------------------------------------- 1, 2

fn criterion_1() -> Outcome {
    let mut failures = Vec::new();
    let p = Lottery::new([
        (seq(&["dagger"]), r(1, 3)),
        (seq(&["x"]), r(1, 2)),
        (seq(&["y"]), r(1, 6)),
    ])
    .unwrap();
    let unsafe_ids: BTreeSet<String> = ["dagger".to_string()].into();
    let reference = Lottery::point(seq(&["x"]));
    let started = Instant::now();
    let dec = safety_decompose(&p, &unsafe_ids, &reference);
    let elapsed = started.elapsed();
    if dec.alpha != r(2, 3) {
        failures.push(format!("alpha = {}", dec.alpha));
    }
    let expected = Lottery::new([(seq(&["x"]), r(3, 4)), (seq(&["y"]), r(1, 4))]).unwrap();
    if dec.conditional != expected {
        failures.push(format!("conditional = {}", dec.conditional.to_json()));
    }
    within(elapsed, Duration::from_millis(1), "decomposition", &mut failures);
    outcome(
        &failures,
        format!("alpha = 2/3, conditional = 3/4 x + 1/4 y in {elapsed:?}"),
    )
}

fn criterion_2() -> Outcome {
    let mut failures = Vec::new();
    let step = || Multiplier::from_matrix(Matrix::identity(1)).unwrap();
    let table = EventTable::with_events(
        1,
        ["a1", "a2", "a3", "b1", "b2", "c"].map(|id| Event::new(id, LexVec::<Rat>::zeros(1), step())),
    )
    .unwrap();
    let single = lexmdp::prefs::concat_seq("c", &seq(&["b1", "b2"]), &table).unwrap();
    if single != seq(&["c", "b1", "b2"]) {
        failures.push(format!("c·(b1, b2) = {single}"));
    }
    let p = Lottery::new([(seq(&["a1", "a2", "a3"]), r(1, 3)), (seq(&["b1", "b2"]), r(2, 3))]).unwrap();
    let got = concat("c", &p, &table).unwrap();
    let want = Lottery::new([
        (seq(&["c", "a1", "a2", "a3"]), r(1, 3)),
        (seq(&["c", "b1", "b2"]), r(2, 3)),
    ])
    .unwrap();
    if got != want {
        failures.push(format!("c·p = {}", got.to_json()));
    }
    outcome(
        &failures,
        "c·(1/3 (a1,a2,a3) + 2/3 (b1,b2)) = 1/3 (c,a1,a2,a3) + 2/3 (c,b1,b2)".into(),
    )
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    let (lo, hi) = REWARD_RANGE;
    // Every integer and half-integer reward in the documented range.
    let rewards: Vec<Rat> = (2 * lo..=2 * hi).map(|k| r(k, 2)).collect();
    let mut slowest = Duration::ZERO;
    for reward in &rewards {
        let params = Fig1Params {
            reward: reward.clone(),
            unsafe_prob: r(1, 10),
        };
        let started = Instant::now();
        let sol = solve_fig1(&params, DEFAULT_HORIZON).unwrap();
        let elapsed = started.elapsed();
        slowest = slowest.max(elapsed);
        within(elapsed, Duration::from_secs(1), "a horizon-4 solve", &mut failures);
        if sol.first_action(GREEN) != "Left" || sol.first_action(RED) != "Right" {
            failures.push(format!(
                "R = {reward}: green {}, red {}",
                sol.first_action(GREEN),
                sol.first_action(RED)
            ));
        }
    }
    outcome(
        &failures,
        format!(
            "green → Left, red → Right for all {} rewards R ∈ [{lo}, {hi}] (step 1/2); slowest solve {slowest:?}",
            rewards.len()
        ),
    )
}

// ---------------------------------------------------------------- 4, 5, 8

struct OracleCase {
    seed: u64,
    model: Lmdp,
    report: SolveReport,
    verdict: lexmdp::OracleVerdict,
}

fn oracle_cases() -> Vec<OracleCase> {
    let params = InstanceParams::default();
    (0..ORACLE_INSTANCES)
        .map(|seed| {
            let model = random_instance(seed, &params);
            let report = lex_value_iteration(&model, &SolverConfig::default()).unwrap();
            let verdict = enumerate_and_evaluate(&model, Horizon::Infinite).unwrap();
            OracleCase {
                seed,
                model,
                report,
                verdict,
            }
        })
        .collect()
}

fn criterion_4(cases: &[OracleCase], elapsed: Duration) -> Outcome {
    let cfg = SolverConfig::default();
    let mut failures = Vec::new();
    let mut worst_gap = 0.0f64;
    for c in cases {
        let Policy::Deterministic(greedy) = &c.report.policy else {
            unreachable!("the solver returns deterministic policies")
        };
        let idx = c.verdict.policy_index(greedy).expect("greedy policy is enumerated");
        let q_greedy = c.verdict.q[idx].as_ref().expect("defined under the diagonal bound");
        for (qp, p) in c.verdict.q.iter().zip(&c.verdict.policies) {
            let qp = qp.as_ref().expect("defined");
            for (s, (grow, prow)) in q_greedy.iter().zip(qp).enumerate() {
                for (a, (g, x)) in grow.iter().zip(prow).enumerate() {
                    if lex_cmp(g, x, Scalarity::ExactRational).unwrap() == Ordering::Less {
                        failures.push(format!("seed {}: greedy loses to {p:?} at ({s}, {a})", c.seed));
                    }
                }
            }
        }
        let max_diag = c.model.max_diag_overall().to_f64();
        let tol = cfg.value_tol * (1.0 + 1.0 / (1.0 - max_diag));
        for (s, (srow, brow)) in c.report.q_star.iter().zip(&c.verdict.q_best).enumerate() {
            for (a, (q, best)) in srow.iter().zip(brow).enumerate() {
                let gap = q.max_abs_diff(&best.to_f64());
                worst_gap = worst_gap.max(gap / tol);
                if gap > tol {
                    failures.push(format!(
                        "seed {}: |Q - Q_best| = {gap:e} > {tol:e} at ({s}, {a})",
                        c.seed
                    ));
                }
            }
        }
    }
    within(elapsed, Duration::from_secs(300), "the oracle suite", &mut failures);
    outcome(
        &failures,
        format!(
            "{} instances, greedy weakly dominates every policy everywhere; worst |Q − Q_best| is {:.3} of tolerance; {elapsed:?}",
            cases.len(),
            worst_gap
        ),
    )
}

fn criterion_5(cases: &[OracleCase]) -> Outcome {
    let mut failures = Vec::new();
    let mut certified = 0;
    for c in cases {
        let best: BTreeSet<Vec<usize>> = c
            .verdict
            .best_policies
            .iter()
            .map(|&i| c.verdict.policies[i].clone())
            .collect();
        let exact_greedy: BTreeSet<Vec<usize>> = c
            .verdict
            .greedy_set(&c.model)
            .into_iter()
            .map(|i| c.verdict.policies[i].clone())
            .collect();
        let solver_greedy = selections(&c.report.restricted_actions[c.report.d()]);
        if best.is_empty() {
            failures.push(format!("seed {}: no certified policy", c.seed));
        }
        if best != exact_greedy {
            failures.push(format!(
                "seed {}: certified {best:?} vs exact greedy {exact_greedy:?}",
                c.seed
            ));
        }
        if best != solver_greedy {
            failures.push(format!(
                "seed {}: certified {best:?} vs solver argmax {solver_greedy:?}",
                c.seed
            ));
        }
        certified += best.len();
    }
    outcome(
        &failures,
        format!(
            "{} instances, {certified} certified policies; certified set = exact lex-argmax selections = solver argmax selections",
            cases.len()
        ),
    )
}

fn criterion_8(cases: &[OracleCase]) -> Outcome {
    let mut failures = Vec::new();
    let mut ratios = 0usize;
    let mut above = 0usize;
    // Largest `r_{t+1} − (γ + 1e-9)·r_t`, as a multiple of the value scale.
    let mut worst_excess = 0.0f64;
    for c in cases {
        let scale = c
            .report
            .v_star
            .iter()
            .flat_map(|v| v.0.iter())
            .fold(1.0f64, |a, x| a.max(x.abs()));
        for (k, t) in c.report.traces.iter().enumerate() {
            for (i, w) in t.history.windows(2).enumerate() {
                ratios += 1;
                let excess = w[1] - (t.modulus + CONTRACTION_SLACK) * w[0];
                if excess > 0.0 {
                    above += 1;
                    worst_excess = worst_excess.max(excess / scale);
                }
                if excess > ROUNDING_SLACK * scale {
                    failures.push(format!(
                        "seed {} dim {}: sweep {} residual {:e} > ({} + 1e-9)·{:e}",
                        c.seed,
                        k + 1,
                        i + 2,
                        w[1],
                        t.modulus,
                        w[0]
                    ));
                }
            }
        }
    }
    outcome(
        &failures,
        format!(
            "{ratios} consecutive residual ratios; {above} exceed (γ + 1e-9) by rounding only, at most {worst_excess:.1e}·‖V‖ (allowance 1e-12·‖V‖)"
        ),
    )
}

// ---------------------------------------------------------------- 6

/// A random event table with Ltp multipliers and one terminal event.
fn random_table(rng: &mut ChaCha8Rng, d: usize) -> EventTable<Rat> {
    let mut events = Vec::new();
    for i in 0..4 {
        let reward = LexVec((0..d).map(|_| r(rng.gen_range(-4..=4), rng.gen_range(1..=3))).collect());
        let multiplier = if i == 3 {
            Multiplier::Terminal
        } else {
            Multiplier::from_matrix(random_ltp(rng, d)).unwrap()
        };
        events.push(Event::new(format!("e{i}"), reward, multiplier));
    }
    EventTable::with_events(d, events).unwrap()
}

fn random_ltp(rng: &mut ChaCha8Rng, d: usize) -> Matrix<Rat> {
    let rows = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| match i.cmp(&j) {
                    Ordering::Less => Rat::zero(),
                    Ordering::Equal => r(rng.gen_range(1..=8), rng.gen_range(1..=4)),
                    Ordering::Greater => r(rng.gen_range(-4..=4), rng.gen_range(1..=3)),
                })
                .collect()
        })
        .collect();
    Matrix::from_rows(rows).unwrap()
}

fn scalar_events(rng: &mut ChaCha8Rng) -> BTreeMap<String, ScalarEvent<Rat>> {
    let ev = |id: &str, reward: Rat, gamma: Rat, terminal: bool, r#unsafe: bool| {
        (
            id.to_string(),
            ScalarEvent {
                id: id.to_string(),
                reward,
                gamma,
                terminal,
                r#unsafe,
            },
        )
    };
    let mut g = || r(rng.gen_range(1..=10), 10);
    let (ga, gb) = (g(), g());
    let mut rw = || r(rng.gen_range(-5..=5), rng.gen_range(1..=2));
    [
        ev("a", rw(), ga, false, false),
        ev("b", rw(), gb, false, false),
        ev("g", rw(), Rat::zero(), true, false),
        ev("dagger", Rat::zero(), Rat::zero(), true, true),
    ]
    .into()
}

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut sampler = LotterySampler::new(6);
    let per_table = 500;
    let tables = PROPERTY_CASES / per_table;

    // Linearity of lottery utilities.
    let mut linear = 0;
    for _ in 0..tables {
        let d = rng.gen_range(1..=3);
        let table = random_table(&mut rng, d);
        let alphabet = table.alphabet();
        for _ in 0..per_table {
            let alpha = sampler.probability();
            let p = sampler.lottery(&table, &alphabet);
            let q = sampler.lottery(&table, &alphabet);
            let lhs = utility_of_lottery(&mix(&alpha, &p, &q).unwrap(), &table).unwrap();
            let up = utility_of_lottery(&p, &table).unwrap();
            let uq = utility_of_lottery(&q, &table).unwrap();
            let rhs = &up.scale(&alpha) + &uq.scale(&(Rat::one() - alpha.clone()));
            linear += 1;
            if lhs != rhs {
                failures.push(format!("linearity: alpha {alpha}"));
            }
        }
    }

    // Memorylessness of the general recursion.
    let mut memoryless = 0;
    for _ in 0..tables {
        let d = rng.gen_range(1..=3);
        let table = random_table(&mut rng, d);
        let rep = check_axiom(
            Axiom::Memorylessness,
            &table,
            &mut sampler,
            per_table,
            &AxiomParams::default(),
        )
        .unwrap();
        memoryless += rep.trials;
        failures.extend(rep.failures.iter().map(|f| format!("memorylessness: {}", f.inputs)));
    }

    // Temporal indifference of constant-discount utilities.
    let mut temporal = 0;
    for _ in 0..tables {
        let d = rng.gen_range(1..=3);
        let gamma = r(rng.gen_range(1..=20), 20);
        let rewards: BTreeMap<String, LexVec<Rat>> = (0..3)
            .map(|i| {
                (
                    format!("e{i}"),
                    LexVec((0..d).map(|_| r(rng.gen_range(-4..=4), 1)).collect()),
                )
            })
            .collect();
        let u = DiscountedUtility {
            rewards,
            gamma: gamma.clone(),
        };
        let params = AxiomParams {
            gamma: Some(gamma),
            ..AxiomParams::default()
        };
        let rep = check_axiom(Axiom::TemporalGammaIndifference, &u, &mut sampler, per_table, &params).unwrap();
        temporal += rep.trials;
        failures.extend(rep.failures.iter().map(|f| format!("temporal: {}", f.inputs)));
    }

    // Single-unsafe suites: lemma coherence, lift consistency, survival mass.
    let (mut lemma, mut lift, mut survival) = (0, 0, 0);
    let unsafe_ids: BTreeSet<String> = ["dagger".to_string()].into();
    for _ in 0..tables {
        let events = scalar_events(&mut rng);
        let list: Vec<ScalarEvent<Rat>> = events.values().cloned().collect();
        let lifted = lift_single_unsafe(&list).unwrap();
        let alphabet = lifted.alphabet();
        let reference = Lottery::point(seq(&["g"]));
        let u_prime = |o: &EventSeq| single_unsafe_recursion(o, &events).unwrap()[1].clone();
        for _ in 0..per_table {
            let tau = sampler.seq(&lifted, &alphabet);
            lift += 1;
            let direct = utility_of_seq(&tau, &lifted).unwrap();
            let recursive = single_unsafe_recursion(&tau, &events).unwrap();
            if direct != recursive {
                failures.push(format!("lift: {tau} gives {direct} vs {recursive}"));
            }

            let p = sampler.lottery(&lifted, &alphabet);
            let q = sampler.lottery(&lifted, &alphabet);
            let dp = safety_decompose(&p, &unsafe_ids, &reference);
            let dq = safety_decompose(&q, &unsafe_ids, &reference);
            let up = single_unsafe_lottery_utility(&dp, u_prime);
            let uq = single_unsafe_lottery_utility(&dq, u_prime);
            lemma += 1;
            let by_lemma = compare_by_lemma(&p, &q, &unsafe_ids, &reference, u_prime, Scalarity::ExactRational);
            let by_utility = lex_cmp(&up, &uq, Scalarity::ExactRational).unwrap();
            if by_lemma != by_utility {
                failures.push(format!("lemma: {} vs {}", p.to_json(), q.to_json()));
            }

            survival += 1;
            let lifted_u = utility_of_lottery(&p, &lifted).unwrap();
            if lifted_u[0] != dp.alpha.clone() - Rat::one() || lifted_u != up {
                failures.push(format!(
                    "survival: {} has {lifted_u} but alpha {}",
                    p.to_json(),
                    dp.alpha
                ));
            }
        }
    }
    let counts = [linear, memoryless, temporal, lemma, lift, survival];
    if counts.iter().any(|&c| c < PROPERTY_CASES) {
        failures.push(format!("too few cases: {counts:?}"));
    }
    outcome(
        &failures,
        format!(
            "linearity {linear}, memorylessness {memoryless}, temporal indifference {temporal}, decomposition-order coherence {lemma}, lift {lift}, survival mass {survival} cases"
        ),
    )
}

// ---------------------------------------------------------------- 7

/// Applies `u_k ↦ c u_k` to a model: `r_k` and row `k` of every multiplier
/// scale by `c`, column `k` by `1/c`, so other dimensions are unchanged.
fn scale_dimension(m: &Lmdp, k: usize, c: &Rat) -> Lmdp {
    let mut out = m.clone();
    for e in &mut out.events {
        e.reward[k] = Number::exact(&e.reward[k].value * c);
        if let Some(g) = &mut e.gamma {
            for (i, row) in g.iter_mut().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    if i == k && j < k {
                        *x = Number::exact(&x.value * c);
                    } else if j == k && i > k {
                        *x = Number::exact(&x.value / c);
                    }
                }
            }
        }
    }
    out
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..PROPERTY_CASES {
        let d = rng.gen_range(1..=4);
        let a = random_ltp(&mut rng, d);
        let draw = |rng: &mut ChaCha8Rng| {
            LexVec::<Rat>((0..d).map(|_| r(rng.gen_range(-2..=2), rng.gen_range(1..=2))).collect())
        };
        let b = draw(&mut rng);
        let u = draw(&mut rng);
        // Share a prefix with u half the time so deeper entries decide.
        let mut v = draw(&mut rng);
        let shared = rng.gen_range(0..=d);
        v.0[..shared].clone_from_slice(&u.0[..shared]);
        let before = lex_cmp(&u, &v, Scalarity::ExactRational).unwrap();
        let au = lexmdp::lex::lex_affine(&a, &b, &u).unwrap();
        let av = lexmdp::lex::lex_affine(&a, &b, &v).unwrap();
        let after = lex_cmp(&au, &av, Scalarity::ExactRational).unwrap();
        if before != after {
            failures.push(format!("case {case}: {before:?} became {after:?}"));
        }
    }

    let cfg = SolverConfig::default();
    let params = InstanceParams::default();
    let factors = [r(1, 2), r(2, 1), r(3, 1), r(1, 3)];
    for seed in 0..SMALL_SUITE {
        let m = random_instance(1000 + seed, &params);
        let k = (seed as usize) % m.d;
        let c = &factors[seed as usize % factors.len()];
        let scaled = scale_dimension(&m, k, c);
        let base = lex_value_iteration(&m, &cfg).unwrap();
        let other = lex_value_iteration(&scaled, &cfg).unwrap();
        if base.restricted_actions != other.restricted_actions {
            failures.push(format!(
                "seed {seed}: restricted sets changed under u_{} ↦ {c}·u_{}",
                k + 1,
                k + 1
            ));
        }
        let cf = c.to_f64();
        let tol = 2.0 * cfg.value_tol * (1.0 + 1.0 / (1.0 - m.max_diag_overall().to_f64())) * cf.max(1.0);
        for (brow, orow) in base.q_star.iter().zip(&other.q_star) {
            for (bq, oq) in brow.iter().zip(orow) {
                for j in 0..m.d {
                    let expect = if j == k { bq[j] * cf } else { bq[j] };
                    if (oq[j] - expect).abs() > tol {
                        failures.push(format!("seed {seed}: Q dim {} is {} not {expect}", j + 1, oq[j]));
                    }
                }
            }
        }
    }
    outcome(
        &failures,
        format!("{PROPERTY_CASES} affine-invariance cases; {SMALL_SUITE} scaled instances keep their argmax sets"),
    )
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let mut failures = Vec::new();
    let started = Instant::now();
    let inst = PathInstance::corner_detour();
    let paths = enumerate_paths(&inst).unwrap();
    let lex = solve_lexicographic(&inst).unwrap();

    // Exhaustive lexicographic minimum over simple paths.
    let min_risk = paths.iter().map(|p| p.risk.clone()).min().unwrap();
    let min_cost = paths
        .iter()
        .filter(|p| p.risk == min_risk)
        .map(|p| p.cost)
        .min()
        .unwrap();
    if lex.exact_risk() != min_risk || lex.exact_cost() != Rat::from_integer(min_cost.into()) {
        failures.push(format!(
            "L = ({}, {}) vs enumeration ({min_risk}, {min_cost})",
            lex.risk, lex.cost
        ));
    }
    // (a)
    if !lex.exact_risk().is_zero() {
        failures.push(format!("(a) lexicographic risk {} ≠ 0", lex.risk));
    }
    // (b)
    let mut shortcut = None;
    for &l in &DEFAULT_LAMBDAS {
        let p = solve_penalty(&inst, l).unwrap();
        let lr = Rat::from_float(l).unwrap();
        let best = paths
            .iter()
            .map(|x| Rat::from_integer(x.cost.into()) + &lr * &x.risk)
            .min()
            .unwrap();
        if p.exact_cost() + &lr * p.exact_risk() != best {
            failures.push(format!("penalty λ = {l}: objective differs from enumeration"));
        }
        if shortcut.is_none() && p.exact_risk().is_positive() && p.exact_cost() < lex.exact_cost() {
            shortcut = Some((l, p.risk, p.cost));
        }
    }
    if shortcut.is_none() {
        failures.push("(b) no λ in the default sweep takes a shorter risky path".into());
    }
    // (c)
    let c0 = solve_constrained(&inst, 0.0).unwrap();
    if (c0.exact_risk(), c0.exact_cost()) != (lex.exact_risk(), lex.exact_cost()) {
        failures.push(format!("(c) δ = 0 gives ({}, {})", c0.risk, c0.cost));
    }
    // (d)
    let ls = lambda_star(&inst).unwrap();
    match &ls {
        Some(ls) => {
            let p = solve_penalty_exact(&inst, ls, ls.to_f64()).unwrap();
            if (p.exact_risk(), p.exact_cost()) != (lex.exact_risk(), lex.exact_cost()) {
                failures.push(format!("(d) penalty at λ* = {ls} gives ({}, {})", p.risk, p.cost));
            }
            // No path is preferred to the lexicographic one at λ*.
            let lex_obj = lex.exact_cost() + ls * lex.exact_risk();
            if paths
                .iter()
                .any(|x| Rat::from_integer(x.cost.into()) + ls * &x.risk < lex_obj)
            {
                failures.push("(d) enumeration finds a cheaper penalised path at λ*".into());
            }
        }
        None => failures.push("(d) no λ* reported".into()),
    }
    let frontier = emit_frontier(&inst, &DEFAULT_LAMBDAS, &[0.0]).unwrap();
    let risks: Vec<f64> = frontier
        .points
        .iter()
        .filter(|p| p.param.is_some())
        .take(DEFAULT_LAMBDAS.len())
        .map(|p| p.risk)
        .collect();
    if risks.windows(2).any(|w| w[1] > w[0]) {
        failures.push(format!("penalty risk increases along λ: {risks:?}"));
    }
    let elapsed = started.elapsed();
    within(elapsed, Duration::from_secs(30), "the harness", &mut failures);
    let (bl, br, bc) = shortcut.unwrap_or((f64::NAN, f64::NAN, f64::NAN));
    outcome(
        &failures,
        format!(
            "{} paths; L = (0, {}); λ = {bl} gives ({br:.4}, {bc}); C(0) = L; λ* = {}; {elapsed:?}",
            paths.len(),
            lex.cost,
            ls.map(|l| l.to_string()).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- 10

/// Textbook value iteration for `d = 1` with one discount `gamma` applied to
/// every non-terminal transition.
fn reference_value_iteration(m: &Lmdp, gamma: f64, tol: f64) -> Vec<f64> {
    let dy: Dynamics<f64> = m.compile();
    let n = dy.n_states();
    let mut v = vec![0.0; n];
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                dy.rows[s]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|t| {
                                let e = &dy.events[t.event];
                                let cont = if e.multiplier.is_terminal() {
                                    0.0
                                } else {
                                    gamma * v[t.next]
                                };
                                t.prob * (e.reward[0] + cont)
                            })
                            .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let res = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        // Stop when the distance to the fixed point is below tol / 10.
        if res * gamma / (1.0 - gamma) <= tol / 10.0 {
            return v;
        }
    }
}

fn criterion_10() -> Outcome {
    let mut failures = Vec::new();
    let cfg = SolverConfig::default();
    let params = InstanceParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for seed in 0..SMALL_SUITE {
        let mut m = random_instance_with_d(2000 + seed, &params, Some(1));
        let gamma = r(rng.gen_range(1..=19), 20);
        for e in &mut m.events {
            if let Some(g) = &mut e.gamma {
                g[0][0] = Number::exact(gamma.clone());
            }
        }
        let report = lex_value_iteration(&m, &cfg).unwrap();
        let reference = reference_value_iteration(&m, gamma.to_f64(), cfg.value_tol);
        for (s, v) in report.v_star.iter().enumerate() {
            let gap = (v[0] - reference[s]).abs();
            worst = worst.max(gap);
            if gap > cfg.value_tol {
                failures.push(format!("seed {seed} state {s}: {} vs {}", v[0], reference[s]));
            }
        }
    }
    outcome(
        &failures,
        format!("{SMALL_SUITE} MDPs; worst |V − V_ref| = {worst:e} ≤ 1e-9"),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "safety decomposition example", criterion_1()));
    results.push((2, "concatenation example", criterion_2()));
    results.push((3, "corridor decisions", criterion_3()));
    let started = Instant::now();
    let cases = oracle_cases();
    let oracle_time = started.elapsed();
    results.push((4, "oracle equivalence", criterion_4(&cases, oracle_time)));
    results.push((5, "greedy biconditional", criterion_5(&cases)));
    results.push((6, "axiom property suites", criterion_6()));
    results.push((7, "order invariance", criterion_7()));
    results.push((8, "contraction", criterion_8(&cases)));
    results.push((9, "risk/cost comparison", criterion_9()));
    results.push((10, "scalar regression", criterion_10()));
    results.sort_by_key(|(n, _, _)| *n);
    let mut all = true;
    for (n, name, o) in &results {
        all &= o.pass;
        println!(
            "criterion {n:>2} [{name}]: {} — {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
