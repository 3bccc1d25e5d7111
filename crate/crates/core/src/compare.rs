//! Risk/cost path planning on a grid under three objectives:
//!
//! - lexicographic: minimise risk, then cost;
//! - penalty: minimise `cost + λ·risk`;
//! - constrained: minimise cost subject to `risk ≤ δ`.
//!
//! Cost is the number of moves. Risk is the number of moves that end in an
//! unsafe cell divided by a normaliser (by default the number of non-wall
//! cells, an upper bound on the length of any simple path).
//!
//! Grid files are a JSON header, a line `---`, then rows over the legend
//! `S` start, `T` target, `#` wall, `!` unsafe, `.` free. Whitespace inside
//! rows is ignored.

use std::collections::VecDeque;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CompareError;
use crate::lex::{format_rat, parse_rat, LexVec, Rat, Scalar, Scalarity};
use crate::model::{EventSpec, Horizon, Lmdp, LmdpBuilder, Number};
use crate::solver::{finite_horizon_evaluate, finite_horizon_solve};

/// The bundled instance with a risk-free detour around an unsafe block.
pub const CORNER_DETOUR: &str = include_str!("../data/corner_detour.grid");
pub const DEFAULT_LAMBDAS: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 5.0, 20.0];
pub const DEFAULT_DELTAS: [f64; 4] = [0.0, 0.05, 0.1, 0.2];
/// Most simple paths [`enumerate_paths`] will list.
pub const PATH_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Free,
    Unsafe,
    Wall,
    Start,
    Target,
}

impl Cell {
    fn parse(c: char) -> Option<Cell> {
        Some(match c {
            '.' => Cell::Free,
            '!' => Cell::Unsafe,
            '#' => Cell::Wall,
            'S' => Cell::Start,
            'T' => Cell::Target,
            _ => return None,
        })
    }
}

/// Moves in tie-break order.
pub const MOVES: [(&str, isize, isize); 4] = [("N", -1, 0), ("E", 0, 1), ("S", 1, 0), ("W", 0, -1)];

#[derive(Debug, Clone, PartialEq)]
pub struct PathInstance {
    pub name: String,
    pub width: usize,
    pub height: usize,
    /// Row-major cells.
    pub cells: Vec<Cell>,
    pub start: usize,
    pub target: usize,
    pub risk_normalizer: Rat,
    /// Probability that a move leaves the agent in place.
    pub slip: Rat,
    pub horizon: usize,
}

impl PathInstance {
    pub fn parse(text: &str) -> Result<Self, CompareError> {
        let lines: Vec<&str> = text.lines().collect();
        let sep = lines
            .iter()
            .position(|l| l.trim() == "---")
            .ok_or_else(|| CompareError::Parse {
                line: 1,
                msg: "missing '---' between header and grid".into(),
            })?;
        let header_text = lines[..sep].join("\n");
        let header: Value = if header_text.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(&header_text).map_err(|e| CompareError::Parse {
                line: e.line(),
                msg: e.to_string(),
            })?
        };
        let header = header.as_object().cloned().ok_or_else(|| CompareError::Parse {
            line: 1,
            msg: "header must be a JSON object".into(),
        })?;
        for k in header.keys() {
            if !["name", "risk_normalizer", "slip", "horizon"].contains(&k.as_str()) {
                return Err(CompareError::Parse {
                    line: 1,
                    msg: format!("unknown header field {k:?}"),
                });
            }
        }
        let rat_field = |key: &str| -> Result<Option<Rat>, CompareError> {
            match header.get(key) {
                None => Some(None),
                Some(Value::String(s)) => parse_rat(s).map(Some),
                Some(Value::Number(n)) => n.as_f64().and_then(Rat::from_float).map(Some),
                Some(_) => None,
            }
            .ok_or_else(|| CompareError::Parse {
                line: 1,
                msg: format!("header field {key:?} must be a number or \"p/q\""),
            })
        };

        let mut rows: Vec<Vec<Cell>> = Vec::new();
        for (i, line) in lines.iter().enumerate().skip(sep + 1) {
            let compact: String = line.chars().filter(|c| !c.is_whitespace()).collect();
            if compact.is_empty() {
                continue;
            }
            let row = compact
                .chars()
                .map(|c| {
                    Cell::parse(c).ok_or_else(|| CompareError::Parse {
                        line: i + 1,
                        msg: format!("unknown cell {c:?}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(CompareError::Parse {
                        line: i + 1,
                        msg: format!("row has {} cells, expected {}", row.len(), first.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(CompareError::Parse {
                line: lines.len(),
                msg: "empty grid".into(),
            });
        }
        let (height, width) = (rows.len(), rows[0].len());
        let cells: Vec<Cell> = rows.into_iter().flatten().collect();
        let find = |kind: Cell, label: &str| -> Result<usize, CompareError> {
            let hits: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == kind).collect();
            match hits.as_slice() {
                [one] => Ok(*one),
                _ => Err(CompareError::Parse {
                    line: sep + 2,
                    msg: format!("grid needs exactly one {label}, found {}", hits.len()),
                }),
            }
        };
        let start = find(Cell::Start, "start 'S'")?;
        let target = find(Cell::Target, "target 'T'")?;
        let open = cells.iter().filter(|c| **c != Cell::Wall).count();
        let slip = rat_field("slip")?.unwrap_or_else(Rat::zero);
        if slip.is_negative() || slip >= Rat::one() {
            return Err(CompareError::Parse {
                line: 1,
                msg: "slip must lie in [0, 1)".into(),
            });
        }
        let risk_normalizer = rat_field("risk_normalizer")?.unwrap_or_else(|| Rat::from_integer(open.into()));
        if !risk_normalizer.is_positive() {
            return Err(CompareError::Parse {
                line: 1,
                msg: "risk_normalizer must be positive".into(),
            });
        }
        let horizon = match header.get("horizon") {
            None => {
                if slip.is_zero() {
                    open
                } else {
                    4 * open
                }
            }
            Some(v) => v.as_u64().filter(|&h| h > 0).ok_or_else(|| CompareError::Parse {
                line: 1,
                msg: "horizon must be a positive integer".into(),
            })? as usize,
        };
        let inst = PathInstance {
            name: header.get("name").and_then(Value::as_str).unwrap_or("grid").to_string(),
            width,
            height,
            cells,
            start,
            target,
            risk_normalizer,
            slip,
            horizon,
        };
        if !inst.reachable() {
            return Err(CompareError::Unreachable);
        }
        Ok(inst)
    }

    pub fn corner_detour() -> Self {
        Self::parse(CORNER_DETOUR).expect("bundled instance parses")
    }

    pub fn is_deterministic(&self) -> bool {
        self.slip.is_zero()
    }

    /// In-bounds, non-wall neighbours in move order.
    pub fn moves(&self, cell: usize) -> Vec<(&'static str, usize)> {
        let (r, c) = ((cell / self.width) as isize, (cell % self.width) as isize);
        MOVES
            .iter()
            .filter_map(|&(name, dr, dc)| {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= self.height as isize || nc >= self.width as isize {
                    return None;
                }
                let next = nr as usize * self.width + nc as usize;
                (self.cells[next] != Cell::Wall).then_some((name, next))
            })
            .collect()
    }

    fn reachable(&self) -> bool {
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([self.start]);
        seen[self.start] = true;
        while let Some(c) = queue.pop_front() {
            if c == self.target {
                return true;
            }
            for (_, n) in self.moves(c) {
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        false
    }

    fn step_risk(&self, dest: usize) -> Rat {
        if self.cells[dest] == Cell::Unsafe {
            self.risk_normalizer.recip()
        } else {
            Rat::zero()
        }
    }

    fn state_name(&self, cell: usize) -> String {
        format!("r{}c{}", cell / self.width, cell % self.width)
    }

    fn open_cells(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| self.cells[i] != Cell::Wall).collect()
    }

    /// The `d = 2` grid LMDP whose per-step reward is `reward(risk_step)`;
    /// multipliers are the identity. Reaching the target is terminal.
    fn model(&self, reward: impl Fn(&Rat) -> [Rat; 2]) -> Lmdp {
        let mut b = LmdpBuilder::new(2, Horizon::Finite(self.horizon));
        let identity = Some(vec![
            vec![Number::exact(Rat::one()), Number::exact(Rat::zero())],
            vec![Number::exact(Rat::zero()), Number::exact(Rat::one())],
        ]);
        let event = |id: &str, r: [Rat; 2], terminal: bool| EventSpec {
            id: id.to_string(),
            reward: r.into_iter().map(Number::exact).collect(),
            gamma: if terminal { None } else { identity.clone() },
            r#unsafe: false,
        };
        let zero = Rat::zero();
        let risky = self.risk_normalizer.recip();
        b.event(event("safe", reward(&zero), false));
        b.event(event("risky", reward(&risky), false));
        b.event(event("arrive", reward(&zero), true));
        b.event(event("done", [Rat::zero(), Rat::zero()], true));
        for a in ["N", "E", "S", "W", "stop"] {
            b.action(a);
        }
        let stay = Rat::one() - self.slip.clone();
        for cell in self.open_cells() {
            b.state(&self.state_name(cell));
        }
        for cell in self.open_cells() {
            let s = self.state_name(cell);
            if cell == self.target {
                b.transition(&s, "stop", &s, "done", Number::exact(Rat::one()));
                continue;
            }
            for (a, next) in self.moves(cell) {
                let e = if next == self.target {
                    "arrive"
                } else if self.cells[next] == Cell::Unsafe {
                    "risky"
                } else {
                    "safe"
                };
                b.transition(&s, a, &self.state_name(next), e, Number::exact(stay.clone()));
                if self.slip.is_positive() {
                    let e = if self.cells[cell] == Cell::Unsafe {
                        "risky"
                    } else {
                        "safe"
                    };
                    b.transition(&s, a, &s, e, Number::exact(self.slip.clone()));
                }
            }
        }
        b.build().expect("grid models are well formed")
    }

    fn state_of(&self, m: &Lmdp, cell: usize) -> usize {
        m.state_index(&self.state_name(cell)).expect("open cell")
    }
}

/// One simple start-to-target path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub moves: String,
    pub risk: Rat,
    pub cost: usize,
}

/// Every simple path from start to target, depth first in move order.
pub fn enumerate_paths(inst: &PathInstance) -> Result<Vec<PathRecord>, CompareError> {
    fn walk(
        inst: &PathInstance,
        cell: usize,
        visited: &mut Vec<bool>,
        moves: &mut String,
        risk: Rat,
        out: &mut Vec<PathRecord>,
    ) -> Result<(), CompareError> {
        if cell == inst.target {
            if out.len() >= PATH_LIMIT {
                return Err(CompareError::Unsupported(format!(
                    "more than {PATH_LIMIT} simple paths"
                )));
            }
            out.push(PathRecord {
                moves: moves.clone(),
                risk,
                cost: moves.len(),
            });
            return Ok(());
        }
        for (name, next) in inst.moves(cell) {
            if visited[next] {
                continue;
            }
            visited[next] = true;
            moves.push_str(name);
            walk(inst, next, visited, moves, &risk + &inst.step_risk(next), out)?;
            moves.pop();
            visited[next] = false;
        }
        Ok(())
    }
    let mut visited = vec![false; inst.cells.len()];
    visited[inst.start] = true;
    let mut out = Vec::new();
    walk(
        inst,
        inst.start,
        &mut visited,
        &mut String::new(),
        Rat::zero(),
        &mut out,
    )?;
    if out.is_empty() {
        return Err(CompareError::Unreachable);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Lexicographic.
    L,
    /// Penalty, parameter λ.
    P,
    /// Constrained, parameter δ.
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub method: Method,
    pub param: Option<f64>,
    pub risk: f64,
    pub cost: f64,
    /// Moves from the start, or a weighted pair of paths for mixtures.
    pub policy: String,
    /// Exact risk and cost as `"p/q"`, when solved in rational arithmetic.
    pub exact: Option<[String; 2]>,
}

impl FrontierPoint {
    fn new(method: Method, param: Option<f64>, risk: Rat, cost: Rat, policy: String) -> Self {
        FrontierPoint {
            method,
            param,
            risk: risk.to_f64(),
            cost: cost.to_f64(),
            policy,
            exact: Some([format_rat(&risk), format_rat(&cost)]),
        }
    }

    /// Exact risk, or the rational value of the float when planned in floats.
    pub fn exact_risk(&self) -> Rat {
        self.exact_field(0, self.risk)
    }

    pub fn exact_cost(&self) -> Rat {
        self.exact_field(1, self.cost)
    }

    fn exact_field(&self, i: usize, x: f64) -> Rat {
        match &self.exact {
            Some(e) => parse_rat(&e[i]).expect("written by format_rat"),
            None => Rat::from_float(x).unwrap_or_else(Rat::zero),
        }
    }
}

/// Solves the grid LMDP with per-step reward `reward` and terminal value
/// `timeout` for every non-target state, then measures the expected
/// (risk, cost) of the resulting policy.
fn solve_grid(
    inst: &PathInstance,
    method: Method,
    param: Option<f64>,
    reward: impl Fn(&Rat) -> [Rat; 2],
    timeout: [Rat; 2],
) -> Result<FrontierPoint, CompareError> {
    let m = inst.model(reward);
    let measure = inst.model(|u| [u.clone(), Rat::one()]);
    let start = inst.state_of(&m, inst.start);
    if inst.is_deterministic() {
        let (policy, v) = plan::<Rat>(inst, &m, &measure, &timeout, Scalarity::ExactRational)?;
        let summary = trace(inst, &m, &policy);
        return Ok(FrontierPoint::new(
            method,
            param,
            v[start][0].clone(),
            v[start][1].clone(),
            summary,
        ));
    }
    // Slip makes exact denominators grow with the horizon; plan in floats.
    let (policy, v) = plan::<f64>(inst, &m, &measure, &timeout, Scalarity::default())?;
    Ok(FrontierPoint {
        method,
        param,
        risk: v[start][0],
        cost: v[start][1],
        policy: trace(inst, &m, &policy),
        exact: None,
    })
}

/// A nonstationary policy and the expected (risk, cost) of every state.
type Plan<T> = (Vec<Vec<usize>>, Vec<LexVec<T>>);

/// Backward induction from `timeout` at every non-target state, then the
/// expected (risk, cost) of the chosen policy.
fn plan<T: Scalar>(
    inst: &PathInstance,
    m: &Lmdp,
    measure: &Lmdp,
    timeout: &[Rat; 2],
    s: Scalarity,
) -> Result<Plan<T>, CompareError> {
    let target = inst.state_of(m, inst.target);
    let terminal: Vec<LexVec<T>> = (0..m.states.len())
        .map(|st| {
            if st == target {
                LexVec::zeros(2)
            } else {
                LexVec(timeout.iter().map(T::from_rat).collect())
            }
        })
        .collect();
    let sol = finite_horizon_solve::<T>(m, inst.horizon, s, Some(&terminal))?;
    let mut values = finite_horizon_evaluate::<T>(measure, &sol.policy)?;
    Ok((sol.policy, values.swap_remove(0)))
}

/// Nominal (slip-free) moves of a nonstationary policy from the start.
fn trace(inst: &PathInstance, m: &Lmdp, policy: &[Vec<usize>]) -> String {
    let mut cell = inst.start;
    let mut out = String::new();
    for step in policy {
        if cell == inst.target {
            break;
        }
        let a = &m.actions[step[inst.state_of(m, cell)]];
        out.push_str(a);
        cell = inst
            .moves(cell)
            .into_iter()
            .find(|(name, _)| name == a)
            .map(|(_, n)| n)
            .expect("policy uses available moves");
    }
    out
}

/// Lexicographic minimiser of (risk, cost).
pub fn solve_lexicographic(inst: &PathInstance) -> Result<FrontierPoint, CompareError> {
    let worst = Rat::from_integer(inst.horizon.into()) / inst.risk_normalizer.clone() + Rat::one();
    solve_grid(
        inst,
        Method::L,
        None,
        |u| [-u.clone(), -Rat::one()],
        [-worst, Rat::zero()],
    )
}

/// Minimiser of `cost + λ·risk`; equal penalties go to the lower risk.
pub fn solve_penalty(inst: &PathInstance, lambda: f64) -> Result<FrontierPoint, CompareError> {
    let exact = Rat::from_float(lambda)
        .filter(|l| !l.is_negative())
        .ok_or_else(|| CompareError::Unsupported(format!("λ must be a non-negative number, got {lambda}")))?;
    solve_penalty_exact(inst, &exact, lambda)
}

pub fn solve_penalty_exact(inst: &PathInstance, lambda: &Rat, label: f64) -> Result<FrontierPoint, CompareError> {
    let h = Rat::from_integer(inst.horizon.into());
    let worst = h.clone() + lambda.clone() * h / inst.risk_normalizer.clone() + Rat::one();
    solve_grid(
        inst,
        Method::P,
        Some(label),
        |u| [-(Rat::one() + lambda.clone() * u.clone()), -u.clone()],
        [-worst, Rat::zero()],
    )
}

/// Points on the lower-left (risk, cost) Pareto front of the simple paths,
/// sorted by increasing risk, restricted to the lower convex hull.
fn hull(paths: &[PathRecord]) -> Vec<&PathRecord> {
    let mut sorted: Vec<&PathRecord> = paths.iter().collect();
    sorted.sort_by(|a, b| a.risk.cmp(&b.risk).then(a.cost.cmp(&b.cost)));
    let mut pareto: Vec<&PathRecord> = Vec::new();
    for p in sorted {
        if pareto.last().is_none_or(|q| p.cost < q.cost) {
            pareto.push(p);
        }
    }
    let mut h: Vec<&PathRecord> = Vec::new();
    for p in pareto {
        while h.len() >= 2 {
            let (a, b) = (h[h.len() - 2], h[h.len() - 1]);
            // Drop b when it lies on or above segment a–p.
            let lhs = (Rat::from_integer(b.cost.into()) - Rat::from_integer(a.cost.into())) * (&p.risk - &a.risk);
            let rhs = (Rat::from_integer(p.cost.into()) - Rat::from_integer(a.cost.into())) * (&b.risk - &a.risk);
            if lhs >= rhs {
                h.pop();
            } else {
                break;
            }
        }
        h.push(p);
    }
    h
}

/// Minimum cost subject to `risk ≤ δ`. Between two hull paths the budget is
/// met exactly by mixing them. Needs deterministic moves.
pub fn solve_constrained(inst: &PathInstance, delta: f64) -> Result<FrontierPoint, CompareError> {
    if !inst.is_deterministic() {
        return Err(CompareError::Unsupported("constrained solving needs slip = 0".into()));
    }
    let d = Rat::from_float(delta)
        .filter(|x| !x.is_negative())
        .ok_or_else(|| CompareError::Unsupported(format!("δ must be a non-negative number, got {delta}")))?;
    let paths = enumerate_paths(inst)?;
    let h = hull(&paths);
    let min_risk = h[0].risk.clone();
    if d < min_risk {
        return Err(CompareError::Infeasible {
            delta,
            min_risk: min_risk.to_f64(),
        });
    }
    let pure = |p: &PathRecord| {
        FrontierPoint::new(
            Method::C,
            Some(delta),
            p.risk.clone(),
            Rat::from_integer(p.cost.into()),
            p.moves.clone(),
        )
    };
    let last = h[h.len() - 1];
    if d >= last.risk {
        return Ok(pure(last));
    }
    let i = h.iter().rposition(|p| p.risk <= d).expect("δ ≥ minimum risk");
    let (a, b) = (h[i], h[i + 1]);
    if a.risk == d {
        return Ok(pure(a));
    }
    let w = (&d - &a.risk) / (&b.risk - &a.risk);
    let ca = Rat::from_integer(a.cost.into());
    let cb = Rat::from_integer(b.cost.into());
    let cost = &ca + &w * (&cb - &ca);
    let policy = format!(
        "{} {} + {} {}",
        format_rat(&(Rat::one() - w.clone())),
        a.moves,
        format_rat(&w),
        b.moves
    );
    Ok(FrontierPoint::new(Method::C, Some(delta), d, cost, policy))
}

/// Smallest λ from which the penalty solution coincides with the
/// lexicographic one, from the enumerated simple paths. `None` under slip.
pub fn lambda_star(inst: &PathInstance) -> Result<Option<Rat>, CompareError> {
    if !inst.is_deterministic() {
        return Ok(None);
    }
    let paths = enumerate_paths(inst)?;
    let lex = paths
        .iter()
        .min_by(|a, b| a.risk.cmp(&b.risk).then(a.cost.cmp(&b.cost)))
        .expect("non-empty");
    let cl = Rat::from_integer(lex.cost.into());
    Ok(Some(
        paths
            .iter()
            .filter(|p| p.risk > lex.risk)
            .map(|p| (&cl - Rat::from_integer(p.cost.into())) / (&p.risk - &lex.risk))
            .fold(Rat::zero(), |a, b| if b > a { b } else { a }),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub instance: String,
    pub lambda_star: Option<f64>,
    pub points: Vec<FrontierPoint>,
    /// Constraint levels below the minimum achievable risk.
    pub infeasible_deltas: Vec<f64>,
}

impl Frontier {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,param,risk,cost\n");
        for p in &self.points {
            let param = p.param.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!("{:?},{param},{},{}\n", p.method, p.risk, p.cost));
        }
        out
    }
}

/// The lexicographic point, then one penalty point per λ, then one
/// constrained point per δ, in the order given.
pub fn emit_frontier(inst: &PathInstance, lambdas: &[f64], deltas: &[f64]) -> Result<Frontier, CompareError> {
    let mut points = vec![solve_lexicographic(inst)?];
    for &l in lambdas {
        points.push(solve_penalty(inst, l)?);
    }
    let mut infeasible_deltas = Vec::new();
    for &d in deltas {
        match solve_constrained(inst, d) {
            Ok(p) => points.push(p),
            Err(CompareError::Infeasible { .. }) => infeasible_deltas.push(d),
            Err(e) => return Err(e),
        }
    }
    Ok(Frontier {
        instance: inst.name.clone(),
        lambda_star: lambda_star(inst)?.map(|l| l.to_f64()),
        points,
        infeasible_deltas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lex::rat;

    #[test]
    fn bundled_instance_parses() {
        let inst = PathInstance::corner_detour();
        assert_eq!((inst.width, inst.height), (8, 4));
        assert_eq!(inst.risk_normalizer, rat(26, 1));
        assert_eq!(inst.horizon, 26);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = PathInstance::parse("{}\n---\nS.T\n.x.\n").unwrap_err();
        assert_eq!(
            err,
            CompareError::Parse {
                line: 4,
                msg: "unknown cell 'x'".into()
            }
        );
        assert!(matches!(
            PathInstance::parse("{}\n---\nS..\n"),
            Err(CompareError::Parse { .. })
        ));
        assert_eq!(PathInstance::parse("{}\n---\nS#T\n"), Err(CompareError::Unreachable));
        assert!(PathInstance::parse("S.T").is_err());
    }

    #[test]
    fn lexicographic_takes_the_detour() {
        let inst = PathInstance::corner_detour();
        let l = solve_lexicographic(&inst).unwrap();
        assert_eq!(l.exact_risk(), Rat::zero());
        assert_eq!(l.cost, 13.0);
        let p0 = solve_penalty(&inst, 0.0).unwrap();
        assert_eq!(p0.cost, 7.0);
        assert_eq!(p0.exact_risk(), rat(2, 26));
    }

    #[test]
    fn equal_risk_everywhere_minimises_cost() {
        let inst = PathInstance::parse("{}\n---\nS!.\n.!.\n.!T\n").unwrap();
        let l = solve_lexicographic(&inst).unwrap();
        let paths = enumerate_paths(&inst).unwrap();
        let min_risk = paths.iter().map(|p| p.risk.clone()).min().unwrap();
        let best_cost = paths
            .iter()
            .filter(|p| p.risk == min_risk)
            .map(|p| p.cost)
            .min()
            .unwrap();
        assert_eq!(l.exact_risk(), min_risk);
        assert_eq!(l.cost, best_cost as f64);
    }

    #[test]
    fn constrained_mixes_at_the_boundary() {
        let inst = PathInstance::corner_detour();
        let c = solve_constrained(&inst, 1.0 / 26.0).unwrap();
        assert_eq!(c.exact_risk(), Rat::from_float(1.0 / 26.0).unwrap());
        assert!(c.cost > 7.0 && c.cost < 13.0);
        assert!(c.policy.contains(" + "));
        let c0 = solve_constrained(&inst, 0.0).unwrap();
        assert_eq!((c0.risk, c0.cost), (0.0, 13.0));
        let loose = solve_constrained(&inst, 1.0).unwrap();
        assert_eq!(loose.cost, 7.0);
    }

    #[test]
    fn lambda_star_reaches_lexicographic_point() {
        let inst = PathInstance::corner_detour();
        let ls = lambda_star(&inst).unwrap().unwrap();
        let l = solve_lexicographic(&inst).unwrap();
        let p = solve_penalty_exact(&inst, &ls, ls.to_f64()).unwrap();
        assert_eq!((p.exact_risk(), p.exact_cost()), (l.exact_risk(), l.exact_cost()));
        let below = solve_penalty_exact(&inst, &(ls - rat(1, 100)), 0.0).unwrap();
        assert!(below.exact_risk() > Rat::zero());
    }

    #[test]
    fn slip_is_supported_by_the_planners_only() {
        let text = CORNER_DETOUR.replace(
            r#"{"name": "corner-detour"}"#,
            r#"{"name": "slippery", "slip": "1/10"}"#,
        );
        let inst = PathInstance::parse(&text).unwrap();
        let l = solve_lexicographic(&inst).unwrap();
        // Near the horizon the plan may accept a sliver of risk to lower the
        // chance of not arriving at all.
        assert!(l.exact.is_none());
        assert!(l.risk < 1e-12);
        assert!(l.cost > 13.0);
        assert!(matches!(
            solve_constrained(&inst, 0.0),
            Err(CompareError::Unsupported(_))
        ));
        assert_eq!(lambda_star(&inst).unwrap(), None);
    }

    #[test]
    fn frontier_round_trips() {
        let inst = PathInstance::corner_detour();
        let f = emit_frontier(&inst, &DEFAULT_LAMBDAS, &DEFAULT_DELTAS).unwrap();
        assert_eq!(f.points.len(), 1 + 6 + 4);
        assert!(f.to_csv().starts_with("method,param,risk,cost\nL,,0,13\n"));
        let back: Frontier = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        let only_l = emit_frontier(&inst, &[], &[]).unwrap();
        assert_eq!(only_l.points.len(), 1);
    }
}
