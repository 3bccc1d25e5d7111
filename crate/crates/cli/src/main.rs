//! `lexmdp`: validate, solve, evaluate and verify lexicographic MDPs.
//!
//! Exit codes: 0 success, 1 invalid input file (model, policy or grid),
//! 2 solver non-convergence, 3 oracle disagreement, 64 usage error
//! (unknown subcommand or flag, or an out-of-range flag value).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use lexmdp::compare::{emit_frontier, PathInstance, DEFAULT_DELTAS, DEFAULT_LAMBDAS};
use lexmdp::fig1::{solve_fig1, Fig1Params, CELLS, DEFAULT_HORIZON, GREEN, RED};
use lexmdp::lex::Rat;
use lexmdp::model::{from_json_value, validate_assumption2, ModelDiagnostics};
use lexmdp::oracle::{trial_seed, verify_suite, InstanceParams};
use lexmdp::solver::finite_horizon_evaluate;
use lexmdp::{
    finite_horizon_solve, lex_value_iteration, policy_evaluation, CompareError, Horizon, Lmdp, ModelError, OracleError,
    Policy, SolveError, SolverConfig,
};

const EXIT_INVALID: u8 = 1;
const EXIT_NON_CONVERGENCE: u8 = 2;
const EXIT_DISAGREEMENT: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "lexmdp", version, about = "Lexicographic MDP solver and verification tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model file and print its diagnostics; exit 0 iff it is clean.
    Validate {
        /// Model JSON file.
        #[arg(long)]
        model: PathBuf,
        /// Also require the strict diagonal bound (always checked for
        /// infinite-horizon models).
        #[arg(long)]
        strict: bool,
    },
    /// Compute optimal values, Q tables, restricted action sets and a policy.
    Solve {
        /// Model JSON file.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Plan over this many steps instead of the model's own horizon.
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        output: OutArgs,
    },
    /// Evaluate a fixed policy and print its value and Q tables.
    Eval {
        /// Model JSON file.
        #[arg(long)]
        model: PathBuf,
        /// JSON file mapping each state to an action or to {action: weight}.
        #[arg(long)]
        policy: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Evaluate over this many steps instead of the model's own horizon.
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        output: OutArgs,
    },
    /// Cross-check the solver against exhaustive exact evaluation on seeded
    /// random instances; exit 0 iff every instance agrees.
    Verify {
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutArgs,
    },
    /// Lexicographic, penalty and constrained plans on a grid instance.
    Compare {
        /// Grid file; defaults to the bundled corner-detour instance.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Penalty weight (repeatable; default 0, 0.5, 1, 2, 5, 20).
        #[arg(long = "lambda")]
        lambdas: Vec<f64>,
        /// Risk bound (repeatable; default 0, 0.05, 0.1, 0.2).
        #[arg(long = "delta")]
        deltas: Vec<f64>,
        /// Emit JSON instead of CSV.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        output: OutArgs,
    },
    /// Solve the seven-cell corridor demo and print the policy arrows.
    #[command(name = "demo-fig1")]
    DemoFig1 {
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: usize,
        /// Reward for leaving a gray cell (integer or fraction such as 7/2).
        #[arg(long, default_value = "10")]
        reward: String,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        output: OutArgs,
    },
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Target sup-norm error of every value table.
    #[arg(long, default_value = "1e-9")]
    tol: f64,
    /// Tie tolerance for action restriction and greedy selection.
    #[arg(long = "tie-eps", default_value = "1e-7")]
    tie_eps: f64,
    /// Sweep budget per dimension before reporting non-convergence.
    #[arg(long = "max-sweeps", default_value_t = 100_000)]
    max_sweeps: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, Failure> {
        let cfg = SolverConfig {
            value_tol: self.tol,
            tie_epsilon: self.tie_eps,
            max_sweeps: self.max_sweeps,
        };
        cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutArgs {
    fn emit(&self, text: &str) -> Result<(), Failure> {
        let mut text = text.to_string();
        if !text.ends_with('\n') {
            text.push('\n');
        }
        match &self.out {
            Some(path) => fs::write(path, text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display()))),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| Failure::invalid(format!("stdout: {e}")))
            }
        }
    }

    fn emit_json(&self, v: &Value) -> Result<(), Failure> {
        self.emit(&serde_json::to_string_pretty(v).expect("JSON values serialize"))
    }
}

/// A failed run: message for standard error and the process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let message = match &e {
            ModelError::Invalid(diag) => format!("{e}\n{}", render_diagnostics(diag)),
            _ => e.to_string(),
        };
        Failure::invalid(message)
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Solve(s) => s.into(),
            other => Failure::invalid(other.to_string()),
        }
    }
}

impl From<CompareError> for Failure {
    fn from(e: CompareError) -> Self {
        match e {
            CompareError::Solve(s) => s.into(),
            other => Failure::invalid(other.to_string()),
        }
    }
}

fn render_diagnostics(diag: &ModelDiagnostics) -> String {
    diag.violations
        .iter()
        .map(|v| format!("{}: [{}] {}", v.location, v.rule, v.detail))
        .collect::<Vec<_>>()
        .join("\n")
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn read_model(path: &Path) -> Result<Lmdp, Failure> {
    Ok(from_json_value(&read_json(path)?)?)
}

fn effective_horizon(m: &Lmdp, flag: Option<usize>) -> Result<Horizon, Failure> {
    match flag {
        Some(0) => Err(Failure::usage("--horizon must be at least 1")),
        Some(t) => Ok(Horizon::Finite(t)),
        None => Ok(m.horizon),
    }
}

fn horizon_json(h: Horizon) -> Value {
    match h {
        Horizon::Infinite => json!("infinite"),
        Horizon::Finite(t) => json!(t),
    }
}

/// `{state: value}` for one table of per-state vectors.
fn per_state<V: serde::Serialize>(m: &Lmdp, values: &[V]) -> Value {
    Value::Object(m.states.iter().cloned().zip(values.iter().map(|v| json!(v))).collect())
}

/// `{state: {action: value}}` for a table indexed by local action.
fn per_state_action<V: serde::Serialize>(m: &Lmdp, q: &[Vec<V>]) -> Value {
    Value::Object(
        m.states
            .iter()
            .enumerate()
            .map(|(s, name)| {
                let row = m.available[s]
                    .iter()
                    .zip(&q[s])
                    .map(|(&a, v)| (m.actions[a].clone(), json!(v)));
                (name.clone(), Value::Object(row.collect()))
            })
            .collect(),
    )
}

fn validate(model: &Path, strict: bool) -> Result<(), Failure> {
    let text = match from_json_value(&read_json(model)?) {
        Ok(m) => {
            let extra = if strict {
                validate_assumption2(&m)
            } else {
                ModelDiagnostics::default()
            };
            if !extra.is_clean() {
                println!("{}", render_diagnostics(&extra));
                return Err(Failure::invalid(format!(
                    "model has {} violation(s)",
                    extra.violations.len()
                )));
            }
            format!(
                "ok: {} states, {} actions, {} events, d = {}, horizon {}",
                m.states.len(),
                m.actions.len(),
                m.events.len(),
                m.d,
                horizon_json(m.horizon)
            )
        }
        Err(ModelError::Invalid(diag)) => {
            println!("{}", render_diagnostics(&diag));
            return Err(Failure::invalid(format!(
                "model has {} violation(s)",
                diag.violations.len()
            )));
        }
        Err(e) => {
            println!("{}: [schema] {e}", model.display());
            return Err(e.into());
        }
    };
    println!("{text}");
    Ok(())
}

fn solve(model: &Path, solver: &SolverArgs, horizon: Option<usize>, out: &OutArgs) -> Result<(), Failure> {
    let cfg = solver.config()?;
    let m = read_model(model)?;
    let report = match effective_horizon(&m, horizon)? {
        Horizon::Infinite => {
            let mut v = lex_value_iteration(&m, &cfg)?.to_json();
            v["horizon"] = horizon_json(Horizon::Infinite);
            v
        }
        Horizon::Finite(t) => {
            let sol = finite_horizon_solve::<f64>(&m, t, cfg.scalarity(), None)?;
            let policy: Vec<Value> = sol
                .policy
                .iter()
                .map(|step| per_state(&m, &step.iter().map(|&a| &m.actions[a]).collect::<Vec<_>>()))
                .collect();
            json!({
                "config": cfg,
                "horizon": t,
                "values": sol.values.iter().map(|v| per_state(&m, v)).collect::<Vec<_>>(),
                "q": sol.q.iter().map(|q| per_state_action(&m, q)).collect::<Vec<_>>(),
                "policy": policy,
            })
        }
    };
    out.emit_json(&report)
}

fn eval(
    model: &Path,
    policy: &Path,
    solver: &SolverArgs,
    horizon: Option<usize>,
    out: &OutArgs,
) -> Result<(), Failure> {
    let cfg = solver.config()?;
    let m = read_model(model)?;
    let pi = Policy::from_json(&read_json(policy)?, &m).map_err(|e| Failure::invalid(format!("policy: {e}")))?;
    pi.validate(&m).map_err(|e| Failure::invalid(format!("policy: {e}")))?;
    let report = match effective_horizon(&m, horizon)? {
        Horizon::Infinite => {
            let pv = policy_evaluation(&m, &pi, &cfg)?;
            json!({
                "config": cfg,
                "horizon": "infinite",
                "policy": pi.to_json(&m),
                "values": per_state(&m, &pv.v),
                "q": per_state_action(&m, &pv.q),
                "dimensions": pv.traces,
            })
        }
        Horizon::Finite(t) => {
            let Policy::Deterministic(a) = &pi else {
                return Err(Failure::invalid(
                    "finite-horizon evaluation needs a deterministic policy",
                ));
            };
            let values = finite_horizon_evaluate::<f64>(&m, &vec![a.clone(); t])?;
            json!({
                "config": cfg,
                "horizon": t,
                "policy": pi.to_json(&m),
                "values": values.iter().map(|v| per_state(&m, v)).collect::<Vec<_>>(),
            })
        }
    };
    out.emit_json(&report)
}

fn verify(trials: u64, seed: u64, solver: &SolverArgs, out: &OutArgs) -> Result<(), Failure> {
    let cfg = solver.config()?;
    let params = InstanceParams::default();
    let checks = verify_suite(trials, seed, &params, &cfg)?;
    let passes = checks.iter().filter(|c| c.passed()).count();
    let summary = json!({
        "config": {
            "solver": cfg,
            "trials": trials,
            "seed": seed,
            "first_instance_seed": trial_seed(seed, 0),
            "max_states": params.max_states,
            "max_actions": params.max_actions,
            "max_d": params.max_d,
            "max_diagonal": format!("{}/20", params.max_diag_twentieths),
        },
        "trials": checks.len(),
        "passes": passes,
        "failures": checks.len() - passes,
        "worst_gap_ratio": checks.iter().map(|c| c.gap_ratio).fold(0.0, f64::max),
        "instances": checks,
    });
    out.emit_json(&summary)?;
    if passes == checks.len() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_DISAGREEMENT,
            message: format!(
                "{} of {} instances disagree with the oracle",
                checks.len() - passes,
                checks.len()
            ),
        })
    }
}

fn compare(grid: Option<&Path>, lambdas: &[f64], deltas: &[f64], as_json: bool, out: &OutArgs) -> Result<(), Failure> {
    let inst = match grid {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
            PathInstance::parse(&text)?
        }
        None => PathInstance::corner_detour(),
    };
    let lambdas = if lambdas.is_empty() {
        DEFAULT_LAMBDAS.to_vec()
    } else {
        lambdas.to_vec()
    };
    let deltas = if deltas.is_empty() {
        DEFAULT_DELTAS.to_vec()
    } else {
        deltas.to_vec()
    };
    if let Some(bad) = lambdas.iter().chain(&deltas).find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Failure::usage(format!(
            "--lambda and --delta must be finite and non-negative, got {bad}"
        )));
    }
    let frontier = emit_frontier(&inst, &lambdas, &deltas)?;
    if as_json {
        out.emit_json(&json!({
            "config": {
                "instance": inst.name,
                "risk_normalizer": inst.risk_normalizer.to_string(),
                "slip": inst.slip.to_string(),
                "horizon": inst.horizon,
                "lambdas": lambdas,
                "deltas": deltas,
            },
            "frontier": frontier,
        }))
    } else {
        let list = |xs: &[f64]| xs.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        let mut text = format!(
            "# instance={} risk_normalizer={} slip={} horizon={}\n# lambdas={} deltas={}\n",
            inst.name,
            inst.risk_normalizer,
            inst.slip,
            inst.horizon,
            list(&lambdas),
            list(&deltas)
        );
        if let Some(ls) = frontier.lambda_star {
            text.push_str(&format!("# lambda_star={ls}\n"));
        }
        if !frontier.infeasible_deltas.is_empty() {
            text.push_str(&format!("# infeasible_deltas={}\n", list(&frontier.infeasible_deltas)));
        }
        text.push_str(&frontier.to_csv());
        out.emit(&text)
    }
}

fn parse_rational(text: &str) -> Result<Rat, Failure> {
    let bad = || Failure::usage(format!("--reward must be a positive rational number, got {text:?}"));
    let parsed: Rat = text.trim().parse().map_err(|_| bad())?;
    if parsed <= Rat::from_integer(0.into()) {
        return Err(bad());
    }
    Ok(parsed)
}

fn demo_fig1(horizon: usize, reward: &str, as_json: bool, out: &OutArgs) -> Result<(), Failure> {
    if horizon == 0 {
        return Err(Failure::usage("--horizon must be at least 1"));
    }
    let params = Fig1Params {
        reward: parse_rational(reward)?,
        ..Fig1Params::default()
    };
    let sol = solve_fig1(&params, horizon)?;
    if as_json {
        let steps: Vec<Value> = sol
            .solution
            .policy
            .iter()
            .map(|step| {
                Value::Object(
                    CELLS
                        .iter()
                        .zip(step)
                        .map(|(c, &a)| (c.to_string(), json!(sol.model.actions[a])))
                        .collect(),
                )
            })
            .collect();
        out.emit_json(&json!({
            "config": {
                "horizon": horizon,
                "reward": params.reward.to_string(),
                "unsafe_prob": params.unsafe_prob.to_string(),
            },
            "policy": steps,
            "values": per_state(&sol.model, &sol.solution.values[0]),
            "green": sol.first_action(GREEN),
            "red": sol.first_action(RED),
        }))
    } else {
        out.emit(&format!(
            "corridor demo: horizon {horizon}, reward {}, unsafe probability {}\n{}green: {}\nred: {}\n",
            params.reward,
            params.unsafe_prob,
            sol,
            sol.first_action(GREEN),
            sol.first_action(RED)
        ))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { model, strict } => validate(&model, strict),
        Command::Solve {
            model,
            solver,
            horizon,
            output,
        } => solve(&model, &solver, horizon, &output),
        Command::Eval {
            model,
            policy,
            solver,
            horizon,
            output,
        } => eval(&model, &policy, &solver, horizon, &output),
        Command::Verify {
            trials,
            seed,
            solver,
            output,
        } => verify(trials, seed, &solver, &output),
        Command::Compare {
            grid,
            lambdas,
            deltas,
            json,
            output,
        } => compare(grid.as_deref(), &lambdas, &deltas, json, &output),
        Command::DemoFig1 {
            horizon,
            reward,
            json,
            output,
        } => demo_fig1(horizon, &reward, json, &output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
