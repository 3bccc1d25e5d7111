//! The LMDP data model: states, actions, an event-emitting transition kernel
//! `P(s', e | s, a)`, and per-event reward vectors and multiplier matrices.
//!
//! Models load from JSON (see `README.md` for the schema), are validated into
//! [`ModelDiagnostics`], and compile into a dense numeric [`Dynamics`] view
//! over either `f64` or exact rationals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ModelError;
use crate::lex::{format_rat, ltp_validate, parse_rat, LexVec, LtpClass, Matrix, Multiplier, Rat, Scalar};
use crate::prefs::{lift_event, EventTable, ScalarEvent};

/// Probability mass tolerance for kernel rows and start distributions.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A model number: an exact rational plus whether the source wrote it as a
/// `"p/q"` string (serialised back the same way) or as a float.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Number {
    pub value: Rat,
    pub exact: bool,
}

impl Number {
    pub fn exact(value: Rat) -> Self {
        Number { value, exact: true }
    }

    pub fn float(x: f64) -> Option<Self> {
        Rat::from_float(x).map(|value| Number { value, exact: false })
    }

    pub fn to<T: Scalar>(&self) -> T {
        T::from_rat(&self.value)
    }

    fn from_json(v: &Value) -> Result<Self, String> {
        match v {
            Value::Number(n) => n
                .as_f64()
                .and_then(Number::float)
                .ok_or_else(|| format!("number {n} is not finite")),
            Value::String(s) => parse_rat(s)
                .map(Number::exact)
                .ok_or_else(|| format!("cannot parse {s:?} as a rational \"p/q\"")),
            other => Err(format!("expected a number or \"p/q\" string, got {other}")),
        }
    }

    fn to_json(&self) -> Value {
        if self.exact {
            Value::String(format_rat(&self.value))
        } else {
            json!(self.value.to_f64())
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exact {
            write!(f, "{}", format_rat(&self.value))
        } else {
            write!(f, "{}", Scalar::to_f64(&self.value))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    Infinite,
    Finite(usize),
}

impl Horizon {
    fn to_json(self) -> Value {
        match self {
            Horizon::Infinite => json!("infinite"),
            Horizon::Finite(t) => json!(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSpec {
    pub id: String,
    pub reward: Vec<Number>,
    /// `None` marks a terminal event (zero multiplier).
    pub gamma: Option<Vec<Vec<Number>>>,
    pub r#unsafe: bool,
}

impl EventSpec {
    pub fn is_terminal(&self) -> bool {
        self.gamma.is_none()
    }

    pub fn reward_vec<T: Scalar>(&self) -> LexVec<T> {
        LexVec(self.reward.iter().map(Number::to).collect())
    }

    pub fn multiplier<T: Scalar>(&self) -> Multiplier<T> {
        match &self.gamma {
            None => Multiplier::Terminal,
            Some(rows) => {
                let m = Matrix::from_rows(rows.iter().map(|r| r.iter().map(Number::to).collect()).collect())
                    .expect("validated square");
                Multiplier::from_matrix(m).expect("validated Ltp")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub next: usize,
    pub event: usize,
    pub prob: Number,
}

/// A validated LMDP. `kernel[s][i]` is the outcome list of action
/// `available[s][i]` at state `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lmdp {
    pub d: usize,
    pub horizon: Horizon,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub available: Vec<Vec<usize>>,
    pub events: Vec<EventSpec>,
    pub kernel: Vec<Vec<Vec<Outcome>>>,
    pub start: Option<Vec<(usize, Number)>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub location: String,
    pub rule: String,
    pub detail: String,
}

/// Every structural problem found in a model; empty iff well formed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub violations: Vec<Violation>,
}

impl ModelDiagnostics {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, location: impl Into<String>, rule: &str, detail: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            rule: rule.to_string(),
            detail: detail.into(),
        });
    }
}

/// Deterministic or randomized stationary policy over action indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Deterministic(Vec<usize>),
    Randomized(Vec<Vec<(usize, f64)>>),
}

impl Policy {
    /// Action weights at state `s`.
    pub fn weights(&self, s: usize) -> Vec<(usize, f64)> {
        match self {
            Policy::Deterministic(a) => vec![(a[s], 1.0)],
            Policy::Randomized(w) => w[s].clone(),
        }
    }

    pub fn validate(&self, m: &Lmdp) -> Result<(), String> {
        let n = m.states.len();
        let len = match self {
            Policy::Deterministic(a) => a.len(),
            Policy::Randomized(w) => w.len(),
        };
        if len != n {
            return Err(format!("policy covers {len} states, model has {n}"));
        }
        for s in 0..n {
            let w = self.weights(s);
            let mut total = 0.0;
            for (a, p) in &w {
                if !m.available[s].contains(a) {
                    let name = m.actions.get(*a).map_or("?", String::as_str);
                    return Err(format!("action {name:?} is not available in state {:?}", m.states[s]));
                }
                if *p < 0.0 {
                    return Err(format!("negative weight at state {:?}", m.states[s]));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(format!("weights at state {:?} sum to {total}", m.states[s]));
            }
        }
        Ok(())
    }

    pub fn to_json(&self, m: &Lmdp) -> Value {
        let mut map = serde_json::Map::new();
        for (s, name) in m.states.iter().enumerate() {
            let v = match self {
                Policy::Deterministic(a) => json!(m.actions[a[s]]),
                Policy::Randomized(w) => {
                    let inner: serde_json::Map<String, Value> =
                        w[s].iter().map(|(a, p)| (m.actions[*a].clone(), json!(p))).collect();
                    Value::Object(inner)
                }
            };
            map.insert(name.clone(), v);
        }
        Value::Object(map)
    }

    /// Parses `{state: action}` or `{state: {action: weight}}`.
    pub fn from_json(v: &Value, m: &Lmdp) -> Result<Self, String> {
        let obj = v.as_object().ok_or("policy must be a JSON object")?;
        let mut det = Vec::with_capacity(m.states.len());
        let mut rnd = Vec::with_capacity(m.states.len());
        let mut randomized = false;
        for s in &m.states {
            let entry = obj
                .get(s)
                .ok_or_else(|| format!("policy has no entry for state {s:?}"))?;
            match entry {
                Value::String(a) => {
                    let ai = m.action_index(a).ok_or_else(|| format!("unknown action {a:?}"))?;
                    det.push(ai);
                    rnd.push(vec![(ai, 1.0)]);
                }
                Value::Object(w) => {
                    randomized = true;
                    let mut row = Vec::new();
                    for (a, p) in w {
                        let ai = m.action_index(a).ok_or_else(|| format!("unknown action {a:?}"))?;
                        let p = p.as_f64().ok_or_else(|| format!("weight for {a:?} is not a number"))?;
                        row.push((ai, p));
                    }
                    det.push(row.first().map_or(0, |x| x.0));
                    rnd.push(row);
                }
                other => return Err(format!("bad policy entry {other}")),
            }
        }
        let p = if randomized {
            Policy::Randomized(rnd)
        } else {
            Policy::Deterministic(det)
        };
        p.validate(m)?;
        Ok(p)
    }
}

impl Lmdp {
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    pub fn event_index(&self, id: &str) -> Option<usize> {
        self.events.iter().position(|e| e.id == id)
    }

    pub fn unsafe_ids(&self) -> BTreeSet<String> {
        self.events
            .iter()
            .filter(|e| e.r#unsafe)
            .map(|e| e.id.clone())
            .collect()
    }

    /// Local index of global action `a` at state `s`.
    pub fn local_action(&self, s: usize, a: usize) -> Option<usize> {
        self.available[s].iter().position(|&x| x == a)
    }

    pub fn event_table<T: Scalar>(&self) -> EventTable<T> {
        EventTable::with_events(
            self.d,
            self.events
                .iter()
                .map(|e| crate::prefs::Event::new(e.id.clone(), e.reward_vec(), e.multiplier())),
        )
        .expect("validated dimensions")
    }

    /// Largest diagonal entry of any non-terminal multiplier in dimension `k`.
    pub fn max_diag(&self, k: usize) -> Rat {
        self.events
            .iter()
            .filter_map(|e| e.gamma.as_ref().map(|g| g[k][k].value.clone()))
            .fold(Rat::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn max_diag_overall(&self) -> Rat {
        (0..self.d)
            .map(|k| self.max_diag(k))
            .fold(Rat::zero(), |a, b| if b > a { b } else { a })
    }

    /// Number of deterministic stationary policies.
    pub fn policy_count(&self) -> u128 {
        self.available
            .iter()
            .fold(1u128, |acc, a| acc.saturating_mul(a.len() as u128))
    }

    pub fn compile<T: Scalar>(&self) -> Dynamics<T> {
        Dynamics::new(self)
    }

    /// Serialises to the general JSON schema.
    pub fn to_json(&self) -> Value {
        let events: Vec<Value> = self
            .events
            .iter()
            .map(|e| {
                let mut obj = serde_json::Map::new();
                obj.insert("id".into(), json!(e.id));
                obj.insert("r".into(), Value::Array(e.reward.iter().map(Number::to_json).collect()));
                obj.insert(
                    "gamma".into(),
                    match &e.gamma {
                        None => json!("terminal"),
                        Some(rows) => Value::Array(
                            rows.iter()
                                .map(|r| Value::Array(r.iter().map(Number::to_json).collect()))
                                .collect(),
                        ),
                    },
                );
                if e.r#unsafe {
                    obj.insert("unsafe".into(), json!(true));
                }
                Value::Object(obj)
            })
            .collect();
        let available: serde_json::Map<String, Value> = self
            .states
            .iter()
            .enumerate()
            .map(|(s, name)| {
                (
                    name.clone(),
                    Value::Array(self.available[s].iter().map(|&a| json!(self.actions[a])).collect()),
                )
            })
            .collect();
        let mut kernel = Vec::new();
        for (s, rows) in self.kernel.iter().enumerate() {
            for (i, row) in rows.iter().enumerate() {
                let out: Vec<Value> = row
                    .iter()
                    .map(|o| {
                        json!({
                            "s2": self.states[o.next],
                            "e": self.events[o.event].id,
                            "p": o.prob.to_json(),
                        })
                    })
                    .collect();
                kernel.push(json!({
                    "s": self.states[s],
                    "a": self.actions[self.available[s][i]],
                    "out": out,
                }));
            }
        }
        let mut obj = serde_json::Map::new();
        obj.insert("d".into(), json!(self.d));
        obj.insert("horizon".into(), self.horizon.to_json());
        obj.insert("states".into(), json!(self.states));
        obj.insert("actions".into(), json!(self.actions));
        obj.insert("available".into(), Value::Object(available));
        obj.insert("events".into(), Value::Array(events));
        obj.insert("kernel".into(), Value::Array(kernel));
        if let Some(start) = &self.start {
            let m: serde_json::Map<String, Value> = start
                .iter()
                .map(|(s, p)| (self.states[*s].clone(), p.to_json()))
                .collect();
            obj.insert("start".into(), Value::Object(m));
        }
        Value::Object(obj)
    }
}

/// Every `(event, i)` whose multiplier diagonal is not strictly below one.
/// Terminal events are exempt.
pub fn validate_assumption2(m: &Lmdp) -> ModelDiagnostics {
    let mut diag = ModelDiagnostics::default();
    for (ei, e) in m.events.iter().enumerate() {
        if let Some(g) = &e.gamma {
            for (i, row) in g.iter().enumerate() {
                if row[i].value >= Rat::one() {
                    diag.push(
                        format!("events[{ei}].gamma[{i}][{i}]"),
                        "diagonal-bound",
                        format!("diagonal entry {} of event {:?} must be less than 1", row[i], e.id),
                    );
                }
            }
        }
    }
    diag
}

/// Parses and validates a model from JSON bytes. Accepts the general schema
/// and the scalar single-unsafe schema (scalar `r`/`gamma` per event), which
/// is lifted to `d = 2` on load.
pub fn load_model(bytes: &[u8]) -> Result<Lmdp, ModelError> {
    let v: Value = serde_json::from_slice(bytes).map_err(|e| ModelError::Parse(e.to_string()))?;
    from_json_value(&v)
}

pub fn from_json_value(v: &Value) -> Result<Lmdp, ModelError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ModelError::Parse("top level must be a JSON object".into()))?;
    let mut diag = ModelDiagnostics::default();
    let known = [
        "d",
        "horizon",
        "states",
        "actions",
        "available",
        "events",
        "kernel",
        "start",
    ];
    for k in obj.keys() {
        if !known.contains(&k.as_str()) {
            diag.push(k.clone(), "schema", format!("unknown field {k:?}"));
        }
    }

    let names = |field: &str, diag: &mut ModelDiagnostics| -> Vec<String> {
        match obj.get(field) {
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .filter_map(|(i, x)| match x.as_str() {
                    Some(s) => Some(s.to_string()),
                    None => {
                        diag.push(format!("{field}[{i}]"), "schema", "expected a string");
                        None
                    }
                })
                .collect(),
            _ => {
                diag.push(field, "schema", "missing or not an array");
                Vec::new()
            }
        }
    };
    let states = names("states", &mut diag);
    let actions = names("actions", &mut diag);
    for (field, list) in [("states", &states), ("actions", &actions)] {
        let mut seen = BTreeSet::new();
        for n in list.iter() {
            if !seen.insert(n) {
                diag.push(field, "duplicate", format!("{n:?} listed twice"));
            }
        }
    }
    if states.is_empty() {
        diag.push("states", "schema", "at least one state is required");
    }

    let horizon = match obj.get("horizon") {
        None => Horizon::Infinite,
        Some(Value::String(s)) if s == "infinite" => Horizon::Infinite,
        Some(Value::Number(n)) if n.as_u64().is_some_and(|t| t >= 1) => Horizon::Finite(n.as_u64().unwrap() as usize),
        Some(other) => {
            diag.push(
                "horizon",
                "schema",
                format!("expected \"infinite\" or a positive integer, got {other}"),
            );
            Horizon::Infinite
        }
    };

    let raw_events = match obj.get("events") {
        Some(Value::Array(e)) => e.clone(),
        _ => {
            diag.push("events", "schema", "missing or not an array");
            Vec::new()
        }
    };
    let scalar_schema = !raw_events.is_empty() && raw_events.iter().all(|e| e.get("r").is_some_and(|r| !r.is_array()));
    let declared_d = match obj.get("d") {
        Some(Value::Number(n)) if n.as_u64().is_some_and(|d| d >= 1) => Some(n.as_u64().unwrap() as usize),
        None if scalar_schema => None,
        Some(other) => {
            diag.push("d", "schema", format!("expected a positive integer, got {other}"));
            None
        }
        None => {
            diag.push("d", "schema", "missing");
            None
        }
    };
    let d = if scalar_schema {
        if declared_d.is_some_and(|d| d != 2) {
            diag.push("d", "dimension", "scalar single-unsafe models lift to d = 2");
        }
        2
    } else {
        declared_d.unwrap_or(1)
    };

    let events = if scalar_schema {
        parse_scalar_events(&raw_events, &mut diag)
    } else {
        parse_events(&raw_events, d, &mut diag)
    };
    let mut seen = BTreeSet::new();
    for (i, e) in events.iter().enumerate() {
        if !seen.insert(e.id.clone()) {
            diag.push(
                format!("events[{i}].id"),
                "duplicate",
                format!("event {:?} defined twice", e.id),
            );
        }
    }

    let state_ix = |n: &str| states.iter().position(|s| s == n);
    let action_ix = |n: &str| actions.iter().position(|a| a == n);
    let event_ix = |n: &str| events.iter().position(|e| e.id == n);

    // Available actions.
    let mut available: Vec<Vec<usize>> = vec![(0..actions.len()).collect(); states.len()];
    if let Some(av) = obj.get("available") {
        match av.as_object() {
            Some(map) => {
                for (s, list) in map {
                    let Some(si) = state_ix(s) else {
                        diag.push(
                            format!("available.{s}"),
                            "unknown-state",
                            format!("state {s:?} is not declared"),
                        );
                        continue;
                    };
                    let mut set = BTreeSet::new();
                    for (j, a) in list.as_array().into_iter().flatten().enumerate() {
                        match a.as_str().and_then(action_ix) {
                            Some(ai) => {
                                set.insert(ai);
                            }
                            None => diag.push(
                                format!("available.{s}[{j}]"),
                                "unknown-action",
                                format!("action {a} is not declared"),
                            ),
                        }
                    }
                    if set.is_empty() {
                        diag.push(
                            format!("available.{s}"),
                            "schema",
                            "every state needs at least one action",
                        );
                    }
                    available[si] = set.into_iter().collect();
                }
            }
            None => diag.push("available", "schema", "expected an object of state → [action]"),
        }
    }

    // Kernel rows.
    let mut rows: BTreeMap<(usize, usize), Vec<Outcome>> = BTreeMap::new();
    let raw_kernel = match obj.get("kernel") {
        Some(Value::Array(k)) => k.clone(),
        _ => {
            diag.push("kernel", "schema", "missing or not an array");
            Vec::new()
        }
    };
    for (ri, row) in raw_kernel.iter().enumerate() {
        let loc = format!("kernel[{ri}]");
        let s = row.get("s").and_then(Value::as_str);
        let a = row.get("a").and_then(Value::as_str);
        let (Some(s), Some(a)) = (s, a) else {
            diag.push(&loc, "schema", "row needs string fields \"s\" and \"a\"");
            continue;
        };
        let Some(si) = state_ix(s) else {
            diag.push(
                format!("{loc}.s"),
                "unknown-state",
                format!("state {s:?} is not declared"),
            );
            continue;
        };
        let Some(ai) = action_ix(a) else {
            diag.push(
                format!("{loc}.a"),
                "unknown-action",
                format!("action {a:?} is not declared"),
            );
            continue;
        };
        if !available[si].contains(&ai) {
            diag.push(
                &loc,
                "unavailable-action",
                format!("action {a:?} is not available in state {s:?}"),
            );
        }
        if rows.contains_key(&(si, ai)) {
            diag.push(&loc, "duplicate", format!("second row for ({s:?}, {a:?})"));
            continue;
        }
        let mut outs = Vec::new();
        let mut mass = Rat::zero();
        for (oi, o) in row
            .get("out")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .enumerate()
        {
            let oloc = format!("{loc}.out[{oi}]");
            let s2 = o.get("s2").and_then(Value::as_str);
            let e = o.get("e").and_then(Value::as_str);
            let p = o.get("p").map(Number::from_json);
            let (Some(s2), Some(e), Some(p)) = (s2, e, p) else {
                diag.push(&oloc, "schema", "outcome needs \"s2\", \"e\" and \"p\"");
                continue;
            };
            let p = match p {
                Ok(p) => p,
                Err(msg) => {
                    diag.push(format!("{oloc}.p"), "schema", msg);
                    continue;
                }
            };
            if p.value.is_negative() {
                diag.push(
                    format!("{oloc}.p"),
                    "negative-probability",
                    format!("probability {p} < 0"),
                );
            }
            mass += p.value.clone();
            let Some(next) = state_ix(s2) else {
                diag.push(
                    format!("{oloc}.s2"),
                    "unknown-state",
                    format!("state {s2:?} is not declared"),
                );
                continue;
            };
            let Some(event) = event_ix(e) else {
                diag.push(
                    format!("{oloc}.e"),
                    "unknown-event",
                    format!("event {e:?} is not declared"),
                );
                continue;
            };
            outs.push(Outcome { next, event, prob: p });
        }
        if outs.is_empty() {
            diag.push(format!("{loc}.out"), "schema", "row has no outcomes");
        }
        check_mass(&mass, &format!("{loc}.out"), &mut diag);
        rows.insert((si, ai), outs);
    }
    let mut kernel = Vec::with_capacity(states.len());
    for (si, acts) in available.iter().enumerate() {
        let mut per_state = Vec::with_capacity(acts.len());
        for &ai in acts {
            match rows.remove(&(si, ai)) {
                Some(r) => per_state.push(r),
                None => {
                    diag.push(
                        "kernel",
                        "missing-row",
                        format!("no transition row for ({:?}, {:?})", states[si], actions[ai]),
                    );
                    per_state.push(Vec::new());
                }
            }
        }
        kernel.push(per_state);
    }

    let start = match obj.get("start") {
        None => None,
        Some(Value::Object(map)) => {
            let mut out = Vec::new();
            let mut mass = Rat::zero();
            for (s, p) in map {
                let Some(si) = state_ix(s) else {
                    diag.push(
                        format!("start.{s}"),
                        "unknown-state",
                        format!("state {s:?} is not declared"),
                    );
                    continue;
                };
                match Number::from_json(p) {
                    Ok(p) => {
                        if p.value.is_negative() {
                            diag.push(
                                format!("start.{s}"),
                                "negative-probability",
                                format!("probability {p} < 0"),
                            );
                        }
                        mass += p.value.clone();
                        out.push((si, p));
                    }
                    Err(msg) => diag.push(format!("start.{s}"), "schema", msg),
                }
            }
            check_mass(&mass, "start", &mut diag);
            out.sort_by_key(|(s, _)| *s);
            Some(out)
        }
        Some(_) => {
            diag.push("start", "schema", "expected an object of state → probability");
            None
        }
    };

    let m = Lmdp {
        d,
        horizon,
        states,
        actions,
        available,
        events,
        kernel,
        start,
    };
    if m.horizon == Horizon::Infinite {
        diag.violations.extend(validate_assumption2(&m).violations);
    }
    if diag.is_clean() {
        Ok(m)
    } else {
        Err(ModelError::Invalid(diag))
    }
}

fn check_mass(mass: &Rat, loc: &str, diag: &mut ModelDiagnostics) {
    let tol = Rat::from_float(MASS_TOLERANCE).expect("finite");
    if (mass.clone() - Rat::one()).abs() > tol {
        diag.push(
            loc,
            "probability-mass",
            format!("probability mass {} ≠ 1", Scalar::to_f64(mass)),
        );
    }
}

fn parse_events(raw: &[Value], d: usize, diag: &mut ModelDiagnostics) -> Vec<EventSpec> {
    let mut out = Vec::new();
    for (i, e) in raw.iter().enumerate() {
        let loc = format!("events[{i}]");
        let Some(id) = e.get("id").and_then(Value::as_str) else {
            diag.push(format!("{loc}.id"), "schema", "missing string id");
            continue;
        };
        let reward: Vec<Number> = match e.get("r").and_then(Value::as_array) {
            Some(r) => r
                .iter()
                .enumerate()
                .filter_map(|(j, x)| match Number::from_json(x) {
                    Ok(n) => Some(n),
                    Err(msg) => {
                        diag.push(format!("{loc}.r[{j}]"), "schema", msg);
                        None
                    }
                })
                .collect(),
            None => {
                diag.push(format!("{loc}.r"), "schema", "expected an array of length d");
                continue;
            }
        };
        if reward.len() != d {
            diag.push(
                format!("{loc}.r"),
                "dimension",
                format!("reward has {} entries, d = {d}", reward.len()),
            );
        }
        let gamma = match e.get("gamma") {
            Some(Value::String(s)) if s == "terminal" => None,
            Some(Value::Array(rows)) => {
                let mut parsed = Vec::new();
                let mut ok = rows.len() == d;
                for (ri, row) in rows.iter().enumerate() {
                    let cells = row.as_array().cloned().unwrap_or_default();
                    if cells.len() != d {
                        ok = false;
                    }
                    let mut prow = Vec::new();
                    for (ci, c) in cells.iter().enumerate() {
                        match Number::from_json(c) {
                            Ok(n) => prow.push(n),
                            Err(msg) => {
                                ok = false;
                                diag.push(format!("{loc}.gamma[{ri}][{ci}]"), "schema", msg);
                            }
                        }
                    }
                    parsed.push(prow);
                }
                if !ok {
                    diag.push(
                        format!("{loc}.gamma"),
                        "dimension",
                        format!("multiplier must be {d}×{d}"),
                    );
                    None
                } else {
                    let m = Matrix::from_rows(
                        parsed
                            .iter()
                            .map(|r| r.iter().map(|n| n.value.clone()).collect())
                            .collect(),
                    )
                    .expect("checked square");
                    match ltp_validate(&m) {
                        LtpClass::Ltp => Some(parsed),
                        LtpClass::Zero => None,
                        LtpClass::Invalid { row, col } => {
                            diag.push(
                                format!("{loc}.gamma[{row}][{col}]"),
                                "ltp",
                                if row == col {
                                    "diagonal entry must be positive".to_string()
                                } else {
                                    "entry above the diagonal must be zero".to_string()
                                },
                            );
                            None
                        }
                    }
                }
            }
            _ => {
                diag.push(
                    format!("{loc}.gamma"),
                    "schema",
                    "expected a d×d matrix or \"terminal\"",
                );
                None
            }
        };
        let r#unsafe = e.get("unsafe").and_then(Value::as_bool).unwrap_or(false);
        if r#unsafe && gamma.is_some() {
            diag.push(
                format!("{loc}.unsafe"),
                "unsafe-terminal",
                "unsafe events must be terminal",
            );
        }
        out.push(EventSpec {
            id: id.to_string(),
            reward,
            gamma,
            r#unsafe,
        });
    }
    out
}

fn parse_scalar_events(raw: &[Value], diag: &mut ModelDiagnostics) -> Vec<EventSpec> {
    let mut out = Vec::new();
    for (i, e) in raw.iter().enumerate() {
        let loc = format!("events[{i}]");
        let Some(id) = e.get("id").and_then(Value::as_str) else {
            diag.push(format!("{loc}.id"), "schema", "missing string id");
            continue;
        };
        let reward = match e.get("r").map(Number::from_json) {
            Some(Ok(n)) => n,
            Some(Err(msg)) => {
                diag.push(format!("{loc}.r"), "schema", msg);
                continue;
            }
            None => {
                diag.push(format!("{loc}.r"), "schema", "missing reward");
                continue;
            }
        };
        let terminal = e.get("terminal").and_then(Value::as_bool).unwrap_or(false);
        let r#unsafe = e.get("unsafe").and_then(Value::as_bool).unwrap_or(false);
        let gamma = match e.get("gamma").map(Number::from_json) {
            Some(Ok(n)) => n,
            Some(Err(msg)) => {
                diag.push(format!("{loc}.gamma"), "schema", msg);
                continue;
            }
            None if terminal || r#unsafe => Number::exact(Rat::zero()),
            None => {
                diag.push(format!("{loc}.gamma"), "schema", "non-terminal events need a gamma");
                continue;
            }
        };
        let spec = ScalarEvent {
            id: id.to_string(),
            reward: reward.clone(),
            gamma: gamma.clone(),
            terminal,
            r#unsafe,
        };
        match lift_scalar(&spec) {
            Ok(e) => out.push(e),
            Err(msg) => diag.push(format!("{loc}.gamma"), "lift", msg),
        }
    }
    out
}

/// Lifts one scalar single-unsafe event into general form, keeping the
/// source's number representation.
pub fn lift_scalar(e: &ScalarEvent<Number>) -> Result<EventSpec, String> {
    let exact = e.reward.exact && e.gamma.exact;
    let num = |v: Rat| Number { value: v, exact };
    let as_rat = ScalarEvent {
        id: e.id.clone(),
        reward: e.reward.value.clone(),
        gamma: e.gamma.value.clone(),
        terminal: e.terminal,
        r#unsafe: e.r#unsafe,
    };
    let lifted = lift_event(&as_rat).map_err(|err| err.to_string())?;
    let reward = lifted.reward.0.into_iter().map(num).collect();
    let gamma = if lifted.multiplier.is_terminal() {
        None
    } else {
        Some(
            (0..2)
                .map(|i| (0..2).map(|j| num(lifted.multiplier.entry(i, j))).collect())
                .collect(),
        )
    };
    Ok(EventSpec {
        id: e.id.clone(),
        reward,
        gamma,
        r#unsafe: e.r#unsafe,
    })
}

/// Builds single-unsafe models from scalar event descriptions in code.
pub fn build_single_unsafe_model(spec: &ScalarModelSpec) -> Result<Lmdp, ModelError> {
    let mut b = LmdpBuilder::new(2, spec.horizon);
    for s in &spec.states {
        b.state(s);
    }
    for a in &spec.actions {
        b.action(a);
    }
    for e in &spec.events {
        b.event(lift_scalar(e).map_err(|msg| {
            let mut d = ModelDiagnostics::default();
            d.push(format!("events.{}", e.id), "lift", msg);
            ModelError::Invalid(d)
        })?);
    }
    for (s, a, s2, e, p) in &spec.transitions {
        b.transition(s, a, s2, e, p.clone());
    }
    b.build()
}

/// Scalar single-unsafe model description.
#[derive(Debug, Clone)]
pub struct ScalarModelSpec {
    pub horizon: Horizon,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub events: Vec<ScalarEvent<Number>>,
    /// `(s, a, s2, e, p)`.
    pub transitions: Vec<(String, String, String, String, Number)>,
}

/// In-code model construction. Available actions are those with rows.
#[derive(Debug, Clone)]
pub struct LmdpBuilder {
    d: usize,
    horizon: Horizon,
    states: Vec<String>,
    actions: Vec<String>,
    events: Vec<EventSpec>,
    rows: Vec<(String, String, String, String, Number)>,
    start: Option<Vec<(String, Number)>>,
}

impl LmdpBuilder {
    pub fn new(d: usize, horizon: Horizon) -> Self {
        LmdpBuilder {
            d,
            horizon,
            states: Vec::new(),
            actions: Vec::new(),
            events: Vec::new(),
            rows: Vec::new(),
            start: None,
        }
    }

    pub fn state(&mut self, name: &str) -> &mut Self {
        if !self.states.iter().any(|s| s == name) {
            self.states.push(name.to_string());
        }
        self
    }

    pub fn action(&mut self, name: &str) -> &mut Self {
        if !self.actions.iter().any(|a| a == name) {
            self.actions.push(name.to_string());
        }
        self
    }

    pub fn event(&mut self, e: EventSpec) -> &mut Self {
        self.events.push(e);
        self
    }

    pub fn transition(&mut self, s: &str, a: &str, s2: &str, e: &str, p: Number) -> &mut Self {
        self.state(s).action(a).state(s2);
        self.rows.push((s.into(), a.into(), s2.into(), e.into(), p));
        self
    }

    pub fn start(&mut self, dist: Vec<(String, Number)>) -> &mut Self {
        self.start = Some(dist);
        self
    }

    pub fn build(&self) -> Result<Lmdp, ModelError> {
        from_json_value(&self.to_json())
    }

    fn to_json(&self) -> Value {
        let mut grouped: BTreeMap<(usize, usize), Vec<Value>> = BTreeMap::new();
        let si = |n: &str| self.states.iter().position(|s| s == n).unwrap();
        let ai = |n: &str| self.actions.iter().position(|a| a == n).unwrap();
        for (s, a, s2, e, p) in &self.rows {
            grouped
                .entry((si(s), ai(a)))
                .or_default()
                .push(json!({"s2": s2, "e": e, "p": p.to_json()}));
        }
        let mut available: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let kernel: Vec<Value> = grouped
            .into_iter()
            .map(|((s, a), out)| {
                available
                    .entry(self.states[s].clone())
                    .or_default()
                    .push(self.actions[a].clone());
                json!({"s": self.states[s], "a": self.actions[a], "out": out})
            })
            .collect();
        let probe = Lmdp {
            d: self.d,
            horizon: self.horizon,
            states: Vec::new(),
            actions: Vec::new(),
            available: Vec::new(),
            events: self.events.clone(),
            kernel: Vec::new(),
            start: None,
        };
        let events = probe.to_json()["events"].clone();
        let mut obj = json!({
            "d": self.d,
            "horizon": self.horizon.to_json(),
            "states": self.states,
            "actions": self.actions,
            "available": available,
            "events": events,
            "kernel": kernel,
        });
        if let Some(start) = &self.start {
            let m: serde_json::Map<String, Value> = start.iter().map(|(s, p)| (s.clone(), p.to_json())).collect();
            obj["start"] = Value::Object(m);
        }
        obj
    }
}

/// A transition of the compiled kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub next: usize,
    pub event: usize,
    pub prob: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledEvent<T> {
    pub reward: LexVec<T>,
    pub multiplier: Multiplier<T>,
}

/// Dense numeric view of a model. Terminal events are routed to an
/// absorbing sink state (index `n_model_states`) whose single no-op action
/// loops with a zero-reward terminal event.
#[derive(Debug, Clone)]
pub struct Dynamics<T> {
    pub d: usize,
    pub n_model_states: usize,
    pub sink: Option<usize>,
    /// Global action indices per state; the sink's no-op is [`Dynamics::NO_OP`].
    pub actions: Vec<Vec<usize>>,
    /// `rows[s][i]`: outcomes of local action `i` at `s`.
    pub rows: Vec<Vec<Vec<Transition<T>>>>,
    pub events: Vec<CompiledEvent<T>>,
}

impl<T: Scalar> Dynamics<T> {
    pub const NO_OP: usize = usize::MAX;

    pub fn new(m: &Lmdp) -> Self {
        let n = m.states.len();
        let mut events: Vec<CompiledEvent<T>> = m
            .events
            .iter()
            .map(|e| CompiledEvent {
                reward: e.reward_vec(),
                multiplier: e.multiplier(),
            })
            .collect();
        let any_terminal = m.events.iter().any(EventSpec::is_terminal);
        let sink = any_terminal.then_some(n);
        let mut rows: Vec<Vec<Vec<Transition<T>>>> = m
            .kernel
            .iter()
            .map(|per_state| {
                per_state
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|o| Transition {
                                next: if m.events[o.event].is_terminal() { n } else { o.next },
                                event: o.event,
                                prob: o.prob.to(),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut actions = m.available.clone();
        if let Some(sink) = sink {
            let absorb = events.len();
            events.push(CompiledEvent {
                reward: LexVec::zeros(m.d),
                multiplier: Multiplier::Terminal,
            });
            rows.push(vec![vec![Transition {
                next: sink,
                event: absorb,
                prob: T::one(),
            }]]);
            actions.push(vec![Self::NO_OP]);
        }
        Dynamics {
            d: m.d,
            n_model_states: n,
            sink,
            actions,
            rows,
            events,
        }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    /// `max_e Γ_kk(e)` over non-terminal events.
    pub fn max_diag(&self, k: usize) -> T {
        self.events
            .iter()
            .map(|e| e.multiplier.entry(k, k))
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// `max_e Σ_{j<k} |Γ_kj(e)|`.
    pub fn max_coupling(&self, k: usize) -> T {
        self.events
            .iter()
            .map(|e| (0..k).fold(T::zero(), |acc, j| acc + e.multiplier.entry(k, j).abs_val()))
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}
