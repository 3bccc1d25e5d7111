//! A corridor where lexicographic safety overrides reward.
//!
//! Seven cells in a row:
//!
//! ```text
//!   white0  white1  green  red  blue  gray0  gray1
//! ```
//!
//! Actions `Left` and `Right` move one cell (clamped at both ends). Leaving
//! a green, red or blue cell ends in the unsafe event with probability
//! `unsafe_prob`; leaving a gray cell earns the scalar reward `R`. The model
//! is the single-unsafe lift of that scalar description, so dimension 1 is
//! the (negated) probability of unsafety and dimension 2 the expected reward
//! collected while safe.

use std::fmt;

use num_traits::{One, Zero};

use crate::error::{ModelError, SolveError};
use crate::lex::{rat, LexVec, Rat, Scalarity};
use crate::model::{build_single_unsafe_model, Horizon, Lmdp, Number, ScalarModelSpec};
use crate::prefs::ScalarEvent;
use crate::solver::{finite_horizon_solve, FiniteHorizonSolution};

pub const CELLS: [&str; 7] = ["white0", "white1", "green", "red", "blue", "gray0", "gray1"];
pub const GREEN: usize = 2;
pub const RED: usize = 3;
pub const DEFAULT_HORIZON: usize = 4;
/// Gray rewards for which the demo's two decisions are checked.
pub const REWARD_RANGE: (i64, i64) = (1, 100);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Color {
    White,
    Green,
    Red,
    Blue,
    Gray,
}

impl Color {
    pub fn of(cell: usize) -> Color {
        match cell {
            0 | 1 => Color::White,
            2 => Color::Green,
            3 => Color::Red,
            4 => Color::Blue,
            _ => Color::Gray,
        }
    }

    pub fn is_risky(self) -> bool {
        matches!(self, Color::Green | Color::Red | Color::Blue)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Params {
    /// Reward for leaving a gray cell.
    pub reward: Rat,
    /// Probability that leaving a risky cell is unsafe.
    pub unsafe_prob: Rat,
}

impl Default for Fig1Params {
    fn default() -> Self {
        Fig1Params {
            reward: rat(10, 1),
            unsafe_prob: rat(1, 10),
        }
    }
}

fn target(cell: usize, action: &str) -> usize {
    match action {
        "Left" => cell.saturating_sub(1),
        _ => (cell + 1).min(CELLS.len() - 1),
    }
}

/// Builds the lifted corridor model with the given finite horizon.
pub fn fig1_model(params: &Fig1Params, horizon: usize) -> Result<Lmdp, ModelError> {
    let ev = |id: &str, r: Rat, terminal: bool, r#unsafe: bool| ScalarEvent {
        id: id.to_string(),
        reward: Number::exact(r),
        gamma: Number::exact(if terminal { Rat::zero() } else { Rat::one() }),
        terminal,
        r#unsafe,
    };
    let events = vec![
        ev("step", Rat::zero(), false, false),
        ev("collect", params.reward.clone(), false, false),
        ev("unsafe", Rat::zero(), true, true),
    ];
    let mut transitions = Vec::new();
    for (cell, name) in CELLS.iter().enumerate() {
        for action in ["Left", "Right"] {
            let next = CELLS[target(cell, action)].to_string();
            let t = |s2: String, e: &str, p: Rat| {
                (
                    name.to_string(),
                    action.to_string(),
                    s2,
                    e.to_string(),
                    Number::exact(p),
                )
            };
            match Color::of(cell) {
                Color::White => transitions.push(t(next, "step", Rat::one())),
                Color::Gray => transitions.push(t(next, "collect", Rat::one())),
                _ => {
                    transitions.push(t(next.clone(), "step", Rat::one() - params.unsafe_prob.clone()));
                    transitions.push(t(next, "unsafe", params.unsafe_prob.clone()));
                }
            }
        }
    }
    build_single_unsafe_model(&ScalarModelSpec {
        horizon: Horizon::Finite(horizon),
        states: CELLS.iter().map(|s| s.to_string()).collect(),
        actions: vec!["Left".into(), "Right".into()],
        events,
        transitions,
    })
}

/// Solved corridor.
#[derive(Debug, Clone)]
pub struct Fig1Solution {
    pub model: Lmdp,
    pub solution: FiniteHorizonSolution<Rat>,
}

impl Fig1Solution {
    /// Action chosen at the first step from `cell`.
    pub fn first_action(&self, cell: usize) -> &str {
        &self.model.actions[self.solution.policy[0][cell]]
    }

    pub fn first_value(&self, cell: usize) -> &LexVec<Rat> {
        &self.solution.values[0][cell]
    }
}

impl fmt::Display for Fig1Solution {
    /// One line per step: an arrow for every cell.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", CELLS.iter().map(|c| format!("{c:>7}")).collect::<String>())?;
        for (t, step) in self.solution.policy.iter().enumerate() {
            let arrows: String = step
                .iter()
                .map(|&a| format!("{:>7}", if self.model.actions[a] == "Left" { "<" } else { ">" }))
                .collect();
            writeln!(f, "{arrows}   t={t}")?;
        }
        Ok(())
    }
}

pub fn solve_fig1(params: &Fig1Params, horizon: usize) -> Result<Fig1Solution, SolveError> {
    let model = fig1_model(params, horizon).map_err(|e| SolveError::BadConfig(e.to_string()))?;
    let solution = finite_horizon_solve::<Rat>(&model, horizon, Scalarity::ExactRational, None)?;
    Ok(Fig1Solution { model, solution })
}
