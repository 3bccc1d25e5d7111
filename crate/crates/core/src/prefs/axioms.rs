//! Sampled checks of preference axioms against a utility representation.
//!
//! Axioms quantify over every lottery, so these are randomized property
//! checks with a fixed, seeded sampler rather than proofs. All arithmetic is
//! exact.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{discounted_utility, expected, mix, utility_of_seq, EventSeq, EventTable, Lottery};
use crate::error::PrefsError;
use crate::lex::{format_rat, lex_cmp_unchecked, rat, LexVec, Rat, Scalarity};

/// A utility representation over event sequences, evaluated exactly.
pub trait SeqUtility {
    fn dim(&self) -> usize;
    fn seq_utility(&self, seq: &EventSeq) -> Result<LexVec<Rat>, PrefsError>;
    fn alphabet(&self) -> Vec<String>;
    fn is_terminal(&self, id: &str) -> bool;

    fn lottery_utility(&self, p: &Lottery<Rat>) -> Result<LexVec<Rat>, PrefsError> {
        expected(p, self.dim(), |s| self.seq_utility(s))
    }

    fn normalize(&self, ids: Vec<String>) -> EventSeq {
        EventSeq::normalized(ids, |e| self.is_terminal(e))
    }

    /// `e · p` with terminal collapse.
    fn prepend(&self, e: &str, p: &Lottery<Rat>) -> Lottery<Rat> {
        if self.is_terminal(e) {
            return Lottery::point(EventSeq::raw([e]));
        }
        let mut out: BTreeMap<EventSeq, Rat> = BTreeMap::new();
        for (seq, prob) in p.iter() {
            let mut ids = vec![e.to_string()];
            ids.extend(seq.ids().iter().cloned());
            *out.entry(EventSeq::raw(ids)).or_insert_with(Rat::zero) += prob.clone();
        }
        Lottery::from_map_unchecked(out)
    }
}

impl SeqUtility for EventTable<Rat> {
    fn dim(&self) -> usize {
        EventTable::dim(self)
    }
    fn seq_utility(&self, seq: &EventSeq) -> Result<LexVec<Rat>, PrefsError> {
        utility_of_seq(seq, self)
    }
    fn alphabet(&self) -> Vec<String> {
        self.ids().map(str::to_string).collect()
    }
    fn is_terminal(&self, id: &str) -> bool {
        EventTable::is_terminal(self, id)
    }
    fn prepend(&self, e: &str, p: &Lottery<Rat>) -> Lottery<Rat> {
        super::concat(e, p, self).expect("event from this table's alphabet")
    }
}

/// Constant-discount utility `u(e·τ) = r(e) + γ u(τ)`.
#[derive(Debug, Clone)]
pub struct DiscountedUtility {
    pub rewards: BTreeMap<String, LexVec<Rat>>,
    pub gamma: Rat,
}

impl SeqUtility for DiscountedUtility {
    fn dim(&self) -> usize {
        self.rewards.values().next().map_or(1, LexVec::dim)
    }
    fn seq_utility(&self, seq: &EventSeq) -> Result<LexVec<Rat>, PrefsError> {
        discounted_utility(seq, &self.rewards, &self.gamma)
    }
    fn alphabet(&self) -> Vec<String> {
        self.rewards.keys().cloned().collect()
    }
    fn is_terminal(&self, _id: &str) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axiom {
    Memorylessness,
    TemporalGammaIndifference,
    Independence,
    SafetyFirst,
}

/// Extra inputs some axioms need.
#[derive(Debug, Clone, Default)]
pub struct AxiomParams {
    /// Discount of the temporal indifference axiom.
    pub gamma: Option<Rat>,
    /// Events whose occurrence makes an outcome indifferent to o†.
    pub unsafe_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomFailure {
    pub inputs: serde_json::Value,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub trials: usize,
    pub failures: Vec<AxiomFailure>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Seeded generator of sequences and rational lotteries.
#[derive(Debug, Clone)]
pub struct LotterySampler {
    rng: ChaCha8Rng,
    pub max_support: usize,
    pub max_len: usize,
    pub max_denominator: i64,
}

impl LotterySampler {
    pub const MAX_SUPPORT: usize = 6;
    pub const MAX_LEN: usize = 5;
    pub const MAX_DENOMINATOR: i64 = 24;

    pub fn new(seed: u64) -> Self {
        LotterySampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_support: Self::MAX_SUPPORT,
            max_len: Self::MAX_LEN,
            max_denominator: Self::MAX_DENOMINATOR,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn pick<'a>(&mut self, alphabet: &'a [String]) -> &'a str {
        alphabet.choose(&mut self.rng).expect("non-empty alphabet")
    }

    /// Raw id list of length `0..=max_len`.
    pub fn ids(&mut self, alphabet: &[String]) -> Vec<String> {
        let len = self.rng.gen_range(0..=self.max_len);
        (0..len).map(|_| self.pick(alphabet).to_string()).collect()
    }

    pub fn seq(&mut self, u: &dyn SeqUtility, alphabet: &[String]) -> EventSeq {
        let ids = self.ids(alphabet);
        u.normalize(ids)
    }

    /// A probability `a/b` with `b <= max_denominator`, in `[0, 1]`.
    pub fn probability(&mut self) -> Rat {
        let b = self.rng.gen_range(1..=self.max_denominator);
        let a = self.rng.gen_range(0..=b);
        rat(a, b)
    }

    /// A probability in `(0, 1]`.
    pub fn positive_probability(&mut self) -> Rat {
        let b = self.rng.gen_range(1..=self.max_denominator);
        let a = self.rng.gen_range(1..=b);
        rat(a, b)
    }

    /// A probability in `[0, 1)`.
    pub fn sub_unit_probability(&mut self) -> Rat {
        let b = self.rng.gen_range(1..=self.max_denominator);
        let a = self.rng.gen_range(0..b);
        rat(a, b)
    }

    /// Integer weights summing to a denominator of at most `max_denominator`.
    pub fn weights(&mut self, k: usize) -> Vec<Rat> {
        let k = k.max(1);
        let total = self.rng.gen_range(k as i64..=self.max_denominator.max(k as i64));
        let mut cuts: Vec<i64> = (1..total).collect();
        cuts.shuffle(&mut self.rng);
        let mut cuts: Vec<i64> = cuts.into_iter().take(k - 1).collect();
        cuts.sort_unstable();
        let mut prev = 0;
        let mut out = Vec::with_capacity(k);
        for c in cuts.into_iter().chain(std::iter::once(total)) {
            out.push(rat(c - prev, total));
            prev = c;
        }
        out
    }

    pub fn lottery(&mut self, u: &dyn SeqUtility, alphabet: &[String]) -> Lottery<Rat> {
        let k = self.rng.gen_range(1..=self.max_support);
        let w = self.weights(k);
        let pairs: Vec<(EventSeq, Rat)> = w.into_iter().map(|p| (self.seq(u, alphabet), p)).collect();
        Lottery::new(pairs).expect("weights sum to one")
    }
}

fn ord_text(o: Ordering) -> String {
    format!("{o:?}")
}

fn vec_text(v: &LexVec<Rat>) -> String {
    let parts: Vec<String> = v.0.iter().map(format_rat).collect();
    format!("({})", parts.join(", "))
}

fn cmp_exact(a: &LexVec<Rat>, b: &LexVec<Rat>) -> Ordering {
    lex_cmp_unchecked(a.as_slice(), b.as_slice(), Scalarity::ExactRational)
}

/// Runs `trials` sampled instances of `axiom` against the preference
/// induced by `u` and reports every counterexample.
pub fn check_axiom(
    axiom: Axiom,
    u: &dyn SeqUtility,
    sampler: &mut LotterySampler,
    trials: usize,
    params: &AxiomParams,
) -> Result<AxiomReport, PrefsError> {
    let alphabet = u.alphabet();
    if alphabet.is_empty() {
        return Err(PrefsError::MissingAxiomInput("a non-empty event alphabet"));
    }
    let mut failures = Vec::new();
    match axiom {
        Axiom::Memorylessness => {
            for _ in 0..trials {
                let e = sampler.pick(&alphabet).to_string();
                let p = sampler.lottery(u, &alphabet);
                let q = sampler.lottery(u, &alphabet);
                let lhs = cmp_exact(
                    &u.lottery_utility(&u.prepend(&e, &p))?,
                    &u.lottery_utility(&u.prepend(&e, &q))?,
                );
                let rhs = if u.is_terminal(&e) {
                    Ordering::Equal
                } else {
                    cmp_exact(&u.lottery_utility(&p)?, &u.lottery_utility(&q)?)
                };
                if lhs != rhs {
                    failures.push(AxiomFailure {
                        inputs: json!({"e": e, "p": p.to_json(), "q": q.to_json()}),
                        lhs: ord_text(lhs),
                        rhs: ord_text(rhs),
                    });
                }
            }
        }
        Axiom::TemporalGammaIndifference => {
            let gamma = params
                .gamma
                .clone()
                .ok_or(PrefsError::MissingAxiomInput("a discount gamma"))?;
            let w = Rat::one() / (gamma.clone() + Rat::one());
            for _ in 0..trials {
                let e = sampler.pick(&alphabet).to_string();
                let t1 = sampler.seq(u, &alphabet);
                let t2 = sampler.seq(u, &alphabet);
                let et1 = Lottery::point(prepend_seq(u, &e, &t1));
                let et2 = Lottery::point(prepend_seq(u, &e, &t2));
                let left = mix(&w, &et1, &Lottery::point(t2.clone()))?;
                let right = mix(&w, &et2, &Lottery::point(t1.clone()))?;
                let lu = u.lottery_utility(&left)?;
                let ru = u.lottery_utility(&right)?;
                if lu != ru {
                    failures.push(AxiomFailure {
                        inputs: json!({"e": e, "tau1": t1.to_string(), "tau2": t2.to_string(), "gamma": format_rat(&gamma)}),
                        lhs: vec_text(&lu),
                        rhs: vec_text(&ru),
                    });
                }
            }
        }
        Axiom::Independence => {
            for _ in 0..trials {
                let alpha = sampler.sub_unit_probability();
                let p = sampler.lottery(u, &alphabet);
                let q = sampler.lottery(u, &alphabet);
                let r = sampler.lottery(u, &alphabet);
                let lhs = cmp_exact(
                    &u.lottery_utility(&mix(&alpha, &p, &q)?)?,
                    &u.lottery_utility(&mix(&alpha, &p, &r)?)?,
                );
                let rhs = cmp_exact(&u.lottery_utility(&q)?, &u.lottery_utility(&r)?);
                if lhs != rhs {
                    failures.push(AxiomFailure {
                        inputs: json!({"alpha": format_rat(&alpha), "p": p.to_json(), "q": q.to_json(), "r": r.to_json()}),
                        lhs: ord_text(lhs),
                        rhs: ord_text(rhs),
                    });
                }
            }
        }
        Axiom::SafetyFirst => {
            let dagger = params
                .unsafe_ids
                .iter()
                .find(|id| alphabet.contains(id))
                .cloned()
                .ok_or(PrefsError::MissingAxiomInput("an unsafe event in the alphabet"))?;
            let safe: Vec<String> = alphabet
                .iter()
                .filter(|e| !params.unsafe_ids.contains(*e))
                .cloned()
                .collect();
            if safe.is_empty() {
                return Err(PrefsError::MissingAxiomInput("at least one safe event"));
            }
            let worst = Lottery::point(EventSeq::raw([dagger.clone()]));
            for _ in 0..trials {
                let eps = sampler.positive_probability();
                let p = sampler.lottery(u, &safe);
                let q = sampler.lottery(u, &safe);
                let lu = u.lottery_utility(&mix(&eps, &worst, &p)?)?;
                let ru = u.lottery_utility(&q)?;
                if cmp_exact(&lu, &ru) != Ordering::Less {
                    failures.push(AxiomFailure {
                        inputs: json!({"epsilon": format_rat(&eps), "p": p.to_json(), "q": q.to_json()}),
                        lhs: vec_text(&lu),
                        rhs: vec_text(&ru),
                    });
                }
            }
        }
    }
    Ok(AxiomReport {
        axiom,
        trials,
        failures,
    })
}

fn prepend_seq(u: &dyn SeqUtility, e: &str, tau: &EventSeq) -> EventSeq {
    if u.is_terminal(e) {
        return EventSeq::raw([e]);
    }
    let mut ids = vec![e.to_string()];
    ids.extend(tau.ids().iter().cloned());
    EventSeq::raw(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lex::{LtpMatrix, Matrix, Multiplier};
    use crate::prefs::Event;

    fn general_table() -> EventTable<Rat> {
        let g = Matrix::from_rows(vec![vec![rat(1, 2), rat(0, 1)], vec![rat(-3, 2), rat(2, 1)]]).unwrap();
        EventTable::with_events(
            2,
            [
                Event::new(
                    "a",
                    LexVec(vec![rat(1, 1), rat(0, 1)]),
                    Multiplier::from_matrix(g).unwrap(),
                ),
                Event::new(
                    "b",
                    LexVec(vec![rat(0, 1), rat(-1, 3)]),
                    Multiplier::Ltp(LtpMatrix::scaled_identity(2, rat(3, 4)).unwrap()),
                ),
                Event::terminal("t", LexVec(vec![rat(-1, 1), rat(5, 1)])),
            ],
        )
        .unwrap()
    }

    #[test]
    fn general_form_is_memoryless() {
        let t = general_table();
        let report = check_axiom(
            Axiom::Memorylessness,
            &t,
            &mut LotterySampler::new(1),
            300,
            &AxiomParams::default(),
        )
        .unwrap();
        assert!(report.passed(), "{:?}", report.failures.first());
    }

    #[test]
    fn discounted_form_is_temporally_indifferent() {
        let rewards: BTreeMap<String, LexVec<Rat>> = [
            ("a".to_string(), LexVec(vec![rat(1, 1), rat(2, 1)])),
            ("b".to_string(), LexVec(vec![rat(0, 1), rat(-1, 2)])),
        ]
        .into_iter()
        .collect();
        let u = DiscountedUtility {
            rewards,
            gamma: rat(2, 3),
        };
        let params = AxiomParams {
            gamma: Some(rat(2, 3)),
            ..Default::default()
        };
        let report = check_axiom(
            Axiom::TemporalGammaIndifference,
            &u,
            &mut LotterySampler::new(2),
            300,
            &params,
        )
        .unwrap();
        assert!(report.passed());
        // The same check with the wrong discount finds counterexamples.
        let params = AxiomParams {
            gamma: Some(rat(1, 3)),
            ..Default::default()
        };
        let report = check_axiom(
            Axiom::TemporalGammaIndifference,
            &u,
            &mut LotterySampler::new(2),
            300,
            &params,
        )
        .unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn linear_utilities_satisfy_independence() {
        let t = general_table();
        let report = check_axiom(
            Axiom::Independence,
            &t,
            &mut LotterySampler::new(3),
            300,
            &AxiomParams::default(),
        )
        .unwrap();
        assert!(report.passed());
    }

    fn outcome_table(x_first: i64) -> EventTable<Rat> {
        EventTable::with_events(
            2,
            [
                Event::terminal("dagger", LexVec(vec![rat(-1, 1), rat(0, 1)])),
                Event::terminal("x", LexVec(vec![rat(x_first, 1), rat(0, 1)])),
                Event::terminal("y", LexVec(vec![rat(0, 1), rat(3, 1)])),
            ],
        )
        .unwrap()
    }

    #[test]
    fn safety_first_holds_for_the_two_dimensional_representation() {
        let params = AxiomParams {
            unsafe_ids: ["dagger".to_string()].into_iter().collect(),
            ..Default::default()
        };
        let report = check_axiom(
            Axiom::SafetyFirst,
            &outcome_table(0),
            &mut LotterySampler::new(4),
            500,
            &params,
        )
        .unwrap();
        assert!(report.passed());
    }

    #[test]
    fn safety_first_counterexamples_are_reported() {
        // x gets first coordinate 1 while y gets 0: a small unsafe mass mixed
        // into x still beats y, so the axiom must fail on some samples.
        let params = AxiomParams {
            unsafe_ids: ["dagger".to_string()].into_iter().collect(),
            ..Default::default()
        };
        let report = check_axiom(
            Axiom::SafetyFirst,
            &outcome_table(1),
            &mut LotterySampler::new(5),
            500,
            &params,
        )
        .unwrap();
        assert!(!report.passed());
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["axiom"], "SafetyFirst");
        assert!(json["failures"][0]["inputs"]["epsilon"].is_string());
    }

    #[test]
    fn weights_are_valid_distributions() {
        let mut s = LotterySampler::new(9);
        for k in 1..=6 {
            let w = s.weights(k);
            assert_eq!(w.len(), k);
            assert!(w.iter().all(|p| *p > Rat::zero()));
            assert_eq!(w.iter().fold(Rat::zero(), |a, b| a + b), Rat::one());
            assert!(w.iter().all(|p| *p.denom() <= num_bigint::BigInt::from(24)));
        }
    }

    #[test]
    fn missing_inputs_are_errors() {
        let t = general_table();
        let mut s = LotterySampler::new(0);
        assert!(check_axiom(Axiom::TemporalGammaIndifference, &t, &mut s, 1, &AxiomParams::default()).is_err());
        assert!(check_axiom(Axiom::SafetyFirst, &t, &mut s, 1, &AxiomParams::default()).is_err());
    }
}
