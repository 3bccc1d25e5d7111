//! Lotteries over event sequences and the utility calculus on them.
//!
//! Utilities of sequences follow the right fold `u(e·τ) = r(e) + Γ(e) u(τ)`
//! with `u(ε) = 0`; lottery utilities are probability-weighted sums. The
//! single-unsafe specialisation lives here too: the safety decomposition
//! `[α, p]`, the comparison that orders lotteries by `α` first and by the
//! conditional lottery second, and the lift of a scalar reward/discount
//! specification into general `(r, Γ)` form.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::PrefsError;
use crate::lex::{lex_cmp_unchecked, LexVec, Matrix, Multiplier, Scalar, Scalarity};

pub mod axioms;

/// An event with its reward vector and multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<T> {
    pub id: String,
    pub reward: LexVec<T>,
    pub multiplier: Multiplier<T>,
}

impl<T: Scalar> Event<T> {
    pub fn new(id: impl Into<String>, reward: LexVec<T>, multiplier: Multiplier<T>) -> Self {
        Event {
            id: id.into(),
            reward,
            multiplier,
        }
    }

    pub fn terminal(id: impl Into<String>, reward: LexVec<T>) -> Self {
        Self::new(id, reward, Multiplier::Terminal)
    }

    pub fn is_terminal(&self) -> bool {
        self.multiplier.is_terminal()
    }
}

/// Events keyed by id, all of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTable<T> {
    d: usize,
    events: BTreeMap<String, Event<T>>,
}

impl<T: Scalar> EventTable<T> {
    pub fn new(d: usize) -> Self {
        EventTable {
            d,
            events: BTreeMap::new(),
        }
    }

    pub fn with_events(d: usize, events: impl IntoIterator<Item = Event<T>>) -> Result<Self, PrefsError> {
        let mut t = Self::new(d);
        for e in events {
            t.insert(e)?;
        }
        Ok(t)
    }

    pub fn insert(&mut self, event: Event<T>) -> Result<(), PrefsError> {
        if event.reward.dim() != self.d {
            return Err(crate::error::LexError::DimensionMismatch {
                left: self.d,
                right: event.reward.dim(),
            }
            .into());
        }
        if let Multiplier::Ltp(m) = &event.multiplier {
            if m.matrix().dim() != self.d {
                return Err(crate::error::LexError::DimensionMismatch {
                    left: self.d,
                    right: m.matrix().dim(),
                }
                .into());
            }
        }
        self.events.insert(event.id.clone(), event);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, id: &str) -> Result<&Event<T>, PrefsError> {
        self.events
            .get(id)
            .ok_or_else(|| PrefsError::UnknownEvent(id.to_string()))
    }

    pub fn is_terminal(&self, id: &str) -> bool {
        self.events.get(id).is_some_and(Event::is_terminal)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.events.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Event<T>> {
        self.events.values()
    }
}

/// A finite sequence of event ids. `EventSeq::empty()` is ε.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventSeq(Vec<String>);

impl EventSeq {
    pub fn empty() -> Self {
        EventSeq(Vec::new())
    }

    /// Builds a sequence verbatim (no terminal normalisation).
    pub fn raw<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Self {
        EventSeq(ids.into_iter().map(Into::into).collect())
    }

    /// Builds a sequence, dropping everything after the first terminal event.
    pub fn normalized<S: Into<String>>(ids: impl IntoIterator<Item = S>, is_terminal: impl Fn(&str) -> bool) -> Self {
        let mut out = Vec::new();
        for id in ids {
            let id = id.into();
            let stop = is_terminal(&id);
            out.push(id);
            if stop {
                break;
            }
        }
        EventSeq(out)
    }

    pub fn ids(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains_any(&self, set: &BTreeSet<String>) -> bool {
        self.0.iter().any(|e| set.contains(e))
    }

    fn prepend(&self, e: &str) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(e.to_string());
        v.extend(self.0.iter().cloned());
        EventSeq(v)
    }
}

impl fmt::Display for EventSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            write!(f, "ε")
        } else {
            write!(f, "({})", self.0.join(","))
        }
    }
}

/// A finite-support distribution over event sequences. Zero-probability
/// entries are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Lottery<T> {
    support: BTreeMap<EventSeq, T>,
}

impl<T: Scalar> Lottery<T> {
    const FLOAT_MASS_TOLERANCE: f64 = 1e-12;

    pub fn point(seq: EventSeq) -> Self {
        let mut support = BTreeMap::new();
        support.insert(seq, T::one());
        Lottery { support }
    }

    /// Builds a lottery, merging repeated sequences. Probabilities must be
    /// non-negative and sum to one (exactly for exact scalars).
    pub fn new(pairs: impl IntoIterator<Item = (EventSeq, T)>) -> Result<Self, PrefsError> {
        let mut support: BTreeMap<EventSeq, T> = BTreeMap::new();
        let mut total = T::zero();
        for (seq, p) in pairs {
            if p < T::zero() {
                return Err(PrefsError::InvalidLottery(format!(
                    "negative probability {p:?} on {seq}"
                )));
            }
            total = total + p.clone();
            if p.is_zero() {
                continue;
            }
            let slot = support.entry(seq).or_insert_with(T::zero);
            *slot = slot.clone() + p;
        }
        if !mass_is_one(&total) {
            return Err(PrefsError::InvalidLottery(format!("probabilities sum to {total:?}")));
        }
        Ok(Lottery { support })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EventSeq, &T)> {
        self.support.iter()
    }

    pub fn probability(&self, seq: &EventSeq) -> T {
        self.support.get(seq).cloned().unwrap_or_else(T::zero)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn total_mass(&self) -> T {
        self.support.values().fold(T::zero(), |a, p| a + p.clone())
    }

    fn from_map_unchecked(support: BTreeMap<EventSeq, T>) -> Self {
        Lottery {
            support: support.into_iter().filter(|(_, p)| !p.is_zero()).collect(),
        }
    }

    /// JSON-friendly view: sequence text → probability.
    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .support
            .iter()
            .map(|(s, p)| (s.to_string(), serde_json::Value::String(scalar_text(p))))
            .collect();
        serde_json::Value::Object(map)
    }
}

fn mass_is_one<T: Scalar>(total: &T) -> bool {
    if is_exact::<T>() {
        *total == T::one()
    } else {
        total.within(&T::one(), Lottery::<T>::FLOAT_MASS_TOLERANCE)
    }
}

/// True for the exact rational scalar.
pub(crate) fn is_exact<T: Scalar>() -> bool {
    std::any::TypeId::of::<T>() == std::any::TypeId::of::<crate::lex::Rat>()
}

pub(crate) fn scalar_text<T: Scalar>(x: &T) -> String {
    if let Some(r) = (x as &dyn std::any::Any).downcast_ref::<crate::lex::Rat>() {
        crate::lex::format_rat(r)
    } else {
        format!("{}", x.to_f64())
    }
}

/// `e · p`: prepend `e` to every sequence of `p`. A terminal `e` collapses
/// the lottery to the point mass on `(e)`.
pub fn concat<T: Scalar>(e: &str, p: &Lottery<T>, table: &EventTable<T>) -> Result<Lottery<T>, PrefsError> {
    let event = table.get(e)?;
    if event.is_terminal() {
        return Ok(Lottery::point(EventSeq::raw([e])));
    }
    let mut out: BTreeMap<EventSeq, T> = BTreeMap::new();
    for (seq, prob) in p.iter() {
        let slot = out.entry(seq.prepend(e)).or_insert_with(T::zero);
        *slot = slot.clone() + prob.clone();
    }
    Ok(Lottery::from_map_unchecked(out))
}

/// Sequence concatenation `e · τ` with terminal normalisation.
pub fn concat_seq<T: Scalar>(e: &str, tau: &EventSeq, table: &EventTable<T>) -> Result<EventSeq, PrefsError> {
    if table.get(e)?.is_terminal() {
        Ok(EventSeq::raw([e]))
    } else {
        Ok(tau.prepend(e))
    }
}

/// Compound lottery `α p + (1 − α) q`.
pub fn mix<T: Scalar>(alpha: &T, p: &Lottery<T>, q: &Lottery<T>) -> Result<Lottery<T>, PrefsError> {
    if *alpha < T::zero() || *alpha > T::one() {
        return Err(PrefsError::BadMixWeight(scalar_text(alpha)));
    }
    let beta = T::one() - alpha.clone();
    let mut out: BTreeMap<EventSeq, T> = BTreeMap::new();
    for (seq, prob) in p.iter() {
        let slot = out.entry(seq.clone()).or_insert_with(T::zero);
        *slot = slot.clone() + alpha.clone() * prob.clone();
    }
    for (seq, prob) in q.iter() {
        let slot = out.entry(seq.clone()).or_insert_with(T::zero);
        *slot = slot.clone() + beta.clone() * prob.clone();
    }
    Ok(Lottery::from_map_unchecked(out))
}

/// Utility of a sequence: right fold of `u(e·τ) = r(e) + Γ(e) u(τ)`.
pub fn utility_of_seq<T: Scalar>(tau: &EventSeq, table: &EventTable<T>) -> Result<LexVec<T>, PrefsError> {
    let mut u = LexVec::zeros(table.dim());
    for id in tau.ids().iter().rev() {
        let e = table.get(id)?;
        u = &e.reward + &e.multiplier.apply(&u);
    }
    Ok(u)
}

/// Expected utility of a lottery.
pub fn utility_of_lottery<T: Scalar>(p: &Lottery<T>, table: &EventTable<T>) -> Result<LexVec<T>, PrefsError> {
    expected(p, table.dim(), |seq| utility_of_seq(seq, table))
}

pub(crate) fn expected<T: Scalar>(
    p: &Lottery<T>,
    d: usize,
    mut u: impl FnMut(&EventSeq) -> Result<LexVec<T>, PrefsError>,
) -> Result<LexVec<T>, PrefsError> {
    let mut acc = LexVec::zeros(d);
    for (seq, prob) in p.iter() {
        acc = acc.add_scaled(prob, &u(seq)?);
    }
    Ok(acc)
}

fn check_discount<T: Scalar>(gamma: &T) -> Result<(), PrefsError> {
    if *gamma <= T::zero() || *gamma > T::one() {
        return Err(PrefsError::BadDiscount(scalar_text(gamma)));
    }
    Ok(())
}

/// Utility under a constant discount: `u(e·τ) = r(e) + γ u(τ)`.
pub fn discounted_utility<T: Scalar>(
    tau: &EventSeq,
    rewards: &BTreeMap<String, LexVec<T>>,
    gamma: &T,
) -> Result<LexVec<T>, PrefsError> {
    check_discount(gamma)?;
    let d = rewards.values().next().map_or(1, LexVec::dim);
    let mut u = LexVec::zeros(d);
    for id in tau.ids().iter().rev() {
        let r = rewards.get(id).ok_or_else(|| PrefsError::UnknownEvent(id.clone()))?;
        u = r.add_scaled(gamma, &u);
    }
    Ok(u)
}

/// The event table whose general-form utility equals [`discounted_utility`]:
/// every event gets `Γ(e) = γ I`.
pub fn discounted_table<T: Scalar>(
    rewards: &BTreeMap<String, LexVec<T>>,
    gamma: &T,
) -> Result<EventTable<T>, PrefsError> {
    check_discount(gamma)?;
    let d = rewards.values().next().map_or(1, LexVec::dim);
    let mut t = EventTable::new(d);
    for (id, r) in rewards {
        let m = crate::lex::LtpMatrix::scaled_identity(d, gamma.clone())?;
        t.insert(Event::new(id.clone(), r.clone(), Multiplier::Ltp(m)))?;
    }
    Ok(t)
}

/// `[α, p]`: probability of safety and the lottery conditioned on safety.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyDecomposition<T> {
    pub alpha: T,
    pub conditional: Lottery<T>,
}

/// Reference lottery used to represent the all-unsafe lottery as `[0, q]`:
/// uniform over the declared safe terminal events, or ε when there are none.
pub fn default_reference<T: Scalar>(table: &EventTable<T>, unsafe_ids: &BTreeSet<String>) -> Lottery<T> {
    let safe_terminal: Vec<&str> = table
        .iter()
        .filter(|e| e.is_terminal() && !unsafe_ids.contains(&e.id))
        .map(|e| e.id.as_str())
        .collect();
    if safe_terminal.is_empty() {
        return Lottery::point(EventSeq::empty());
    }
    let w = T::one() / T::from_int(safe_terminal.len() as i64);
    Lottery::from_map_unchecked(
        safe_terminal
            .into_iter()
            .map(|id| (EventSeq::raw([id]), w.clone()))
            .collect(),
    )
}

/// Splits `p` into its safety mass and its safe conditional lottery.
pub fn safety_decompose<T: Scalar>(
    p: &Lottery<T>,
    unsafe_ids: &BTreeSet<String>,
    reference: &Lottery<T>,
) -> SafetyDecomposition<T> {
    let mut safe: BTreeMap<EventSeq, T> = BTreeMap::new();
    let mut alpha = T::zero();
    for (seq, prob) in p.iter() {
        if !seq.contains_any(unsafe_ids) {
            alpha = alpha + prob.clone();
            safe.insert(seq.clone(), prob.clone());
        }
    }
    if alpha.is_zero() {
        return SafetyDecomposition {
            alpha,
            conditional: reference.clone(),
        };
    }
    let conditional =
        Lottery::from_map_unchecked(safe.into_iter().map(|(s, prob)| (s, prob / alpha.clone())).collect());
    SafetyDecomposition { alpha, conditional }
}

/// Expected scalar utility `u'(p)` over safe outcomes.
pub fn expected_scalar<T: Scalar>(p: &Lottery<T>, u_prime: impl Fn(&EventSeq) -> T) -> T {
    p.iter()
        .fold(T::zero(), |acc, (seq, prob)| acc + prob.clone() * u_prime(seq))
}

/// Compares lotteries by safety mass first, then by conditional expected `u'`.
pub fn compare_by_lemma<T: Scalar>(
    p: &Lottery<T>,
    q: &Lottery<T>,
    unsafe_ids: &BTreeSet<String>,
    reference: &Lottery<T>,
    u_prime: impl Fn(&EventSeq) -> T,
    s: Scalarity,
) -> Ordering {
    let a = safety_decompose(p, unsafe_ids, reference);
    let b = safety_decompose(q, unsafe_ids, reference);
    let first = lex_cmp_unchecked(std::slice::from_ref(&a.alpha), std::slice::from_ref(&b.alpha), s);
    if first != Ordering::Equal {
        return first;
    }
    let up = expected_scalar(&a.conditional, &u_prime);
    let uq = expected_scalar(&b.conditional, &u_prime);
    lex_cmp_unchecked(&[up], &[uq], s)
}

/// Two-dimensional utility of an outcome: `(−1, 0)` if unsafe, `(0, u'(o))` otherwise.
pub fn single_unsafe_utility<T: Scalar>(
    o: &EventSeq,
    unsafe_ids: &BTreeSet<String>,
    u_prime: impl Fn(&EventSeq) -> T,
) -> LexVec<T> {
    if o.contains_any(unsafe_ids) {
        LexVec(vec![-T::one(), T::zero()])
    } else {
        LexVec(vec![T::zero(), u_prime(o)])
    }
}

/// Linear extension to lotteries: `u([α, p]) = (α − 1, α u'(p))`.
pub fn single_unsafe_lottery_utility<T: Scalar>(
    decomposition: &SafetyDecomposition<T>,
    u_prime: impl Fn(&EventSeq) -> T,
) -> LexVec<T> {
    let alpha = decomposition.alpha.clone();
    let up = expected_scalar(&decomposition.conditional, u_prime);
    LexVec(vec![alpha.clone() - T::one(), alpha * up])
}

/// Scalar description of an event in the single-unsafe setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarEvent<T> {
    pub id: String,
    pub reward: T,
    pub gamma: T,
    pub terminal: bool,
    #[serde(default)]
    pub r#unsafe: bool,
}

impl<T: Scalar> ScalarEvent<T> {
    /// Unsafe events always end the sequence.
    pub fn is_terminal(&self) -> bool {
        self.terminal || self.r#unsafe
    }
}

/// Lifts scalar `(r, γ)` events into two-dimensional `(r̃, Γ̃)` events:
/// `r̃ = (0, r)` or `(−1, 0)` for unsafe events, and
/// `Γ̃ = [[1, 0], [r, γ]]` for non-terminal events, `0` otherwise.
pub fn lift_single_unsafe<T: Scalar>(events: &[ScalarEvent<T>]) -> Result<EventTable<T>, PrefsError> {
    let mut table = EventTable::new(2);
    for e in events {
        table.insert(lift_event(e)?)?;
    }
    Ok(table)
}

pub fn lift_event<T: Scalar>(e: &ScalarEvent<T>) -> Result<Event<T>, PrefsError> {
    let reward = if e.r#unsafe {
        LexVec(vec![-T::one(), T::zero()])
    } else {
        LexVec(vec![T::zero(), e.reward.clone()])
    };
    let multiplier = if e.is_terminal() {
        Multiplier::Terminal
    } else {
        if e.gamma <= T::zero() {
            return Err(PrefsError::NonPositiveMultiplier {
                id: e.id.clone(),
                gamma: scalar_text(&e.gamma),
            });
        }
        let m = Matrix::from_rows(vec![vec![T::one(), T::zero()], vec![e.reward.clone(), e.gamma.clone()]])?;
        Multiplier::from_matrix(m)?
    };
    Ok(Event::new(e.id.clone(), reward, multiplier))
}

/// Three-case recursion of the single-unsafe sequential utility, evaluated
/// directly on the scalar description (no matrices involved).
pub fn single_unsafe_recursion<T: Scalar>(
    tau: &EventSeq,
    events: &BTreeMap<String, ScalarEvent<T>>,
) -> Result<LexVec<T>, PrefsError> {
    let mut u1 = T::zero();
    let mut u2 = T::zero();
    for id in tau.ids().iter().rev() {
        let e = events.get(id).ok_or_else(|| PrefsError::UnknownEvent(id.clone()))?;
        if e.r#unsafe {
            u1 = -T::one();
            u2 = T::zero();
        } else if e.is_terminal() {
            u1 = T::zero();
            u2 = e.reward.clone();
        } else {
            let next2 = (T::one() + u1.clone()) * e.reward.clone() + e.gamma.clone() * u2;
            u2 = next2;
        }
    }
    Ok(LexVec(vec![u1, u2]))
}
