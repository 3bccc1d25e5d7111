//! Lexicographic Markov decision processes.
//!
//! - [`lex`]: lexicographic vectors, Ltp multiplier matrices, comparison.
//! - [`prefs`]: lotteries over event sequences, utilities, the single-unsafe
//!   safety decomposition and lift, and randomized axiom checks.
//! - [`model`]: the LMDP data model, JSON schema and validation.
//! - [`solver`]: dimension-wise lexicographic value iteration, policy
//!   evaluation and finite-horizon backward induction.
//! - [`oracle`]: exact brute-force verification on small instances.
//! - [`compare`]: lexicographic vs. penalty vs. constrained planning on grids.
//! - [`fig1`]: the corridor demo where lexicographic safety beats greed.

pub mod compare;
pub mod error;
pub mod fig1;
pub mod lex;
pub mod model;
pub mod oracle;
pub mod prefs;
pub mod solver;

pub use error::{CompareError, LexError, ModelError, OracleError, PrefsError, SolveError};
pub use lex::{lex_cmp, lex_max, LexVec, LtpMatrix, Matrix, Multiplier, Rat, Scalar, Scalarity};
pub use model::{load_model, Dynamics, Horizon, Lmdp, ModelDiagnostics, Policy};
pub use oracle::{enumerate_and_evaluate, trajectory_tree_value, OracleVerdict};
pub use solver::{
    finite_horizon_solve, greedy_policy, lex_value_iteration, policy_evaluation, SolveReport, SolverConfig,
};
