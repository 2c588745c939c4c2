//! Run drivers: the adaptive loop wiring pair steps, error estimation,
//! quantity-of-interest accumulation and the deadbeat controller together,
//! plus a fixed-step variant sharing the same accumulation path.

use std::time::Instant;

use crate::control::{
    classic_estimate, deadbeat_next_step, goal_estimate, initial_step, ControllerConfig,
    EstimatorVariant,
};
use crate::error::{Error, Result};
use crate::integrators::pair_step;
use crate::linalg;
use crate::problems::IvpProblem;
use crate::qoi::{DensityFunction, QuadratureRule};
use crate::schemes::SchemePair;

/// Default cap on the number of steps of a single run.
pub const DEFAULT_MAX_STEPS: usize = 10_000_000;

/// Why a run stopped early. The report produced alongside is partial but
/// internally consistent up to the failure point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunFailure {
    BlowUp { t: f64, dt: f64 },
    SingularSystem { t: f64, dt: f64 },
    StepBudget { t: f64 },
}

impl RunFailure {
    pub fn to_error(self, budget: usize) -> Error {
        match self {
            RunFailure::BlowUp { t, dt } => Error::BlowUp { t, dt },
            RunFailure::SingularSystem { t, dt } => Error::SingularSystem { t, dt },
            RunFailure::StepBudget { t } => Error::StepBudget { budget, t },
        }
    }
}

/// One executed step: its start time, size, error estimate, and whether the
/// estimate was exactly zero.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub estimate: f64,
    pub zero_estimate: bool,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunReport {
    /// Tolerance of the adaptive run; `None` for fixed-step runs.
    pub tau: Option<f64>,
    pub steps: Vec<StepRecord>,
    /// Endpoint states, starting with the initial state (`steps.len() + 1`
    /// entries on success).
    pub states: Vec<Vec<f64>>,
    pub n_steps: usize,
    /// Accumulated quantity of interest.
    pub j_h: f64,
    /// `|J_ref - J_h|`, filled by callers that hold a reference value.
    pub err_qoi: Option<f64>,
    /// Euclidean distance to the exact final state, when one is catalogued.
    pub err_solution_te: Option<f64>,
    pub wall_ms: f64,
    pub failure: Option<RunFailure>,
}

impl RunReport {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("a report always holds the initial state")
    }

    /// Total time advanced; telescopes to `te - t0` on success.
    pub fn time_covered(&self) -> f64 {
        self.steps.iter().map(|s| s.dt).sum()
    }
}

fn validate_run_inputs(
    problem: &IvpProblem,
    pair: &SchemePair,
    j: &DensityFunction,
    rule: &QuadratureRule,
) -> Result<()> {
    if let Some(w) = &j.linear_weights {
        if w.len() != problem.dim {
            return Err(Error::Config(format!(
                "density {} has {} weights but the problem dimension is {}",
                j.label,
                w.len(),
                problem.dim
            )));
        }
    }
    if matches!(pair, SchemePair::Theta { .. }) && problem.linear_rhs().is_none() {
        return Err(Error::Config(format!(
            "the implicit theta pair needs a linear right-hand side, \
             but {} is not in linear form",
            problem.label
        )));
    }
    if *rule == QuadratureRule::Simpson {
        let needed = pair.order().saturating_sub(1);
        match pair.dense_order_at(0.5) {
            Some(ord) if ord >= needed => {}
            Some(ord) => {
                return Err(Error::Config(format!(
                    "Simpson accumulation needs midpoint values of order >= {needed}, \
                     but the pair provides order {ord}"
                )))
            }
            None => {
                return Err(Error::Config(
                    "Simpson accumulation needs midpoint values, \
                     but the pair provides none"
                        .into(),
                ))
            }
        }
    }
    Ok(())
}

struct LoopOutcome {
    steps: Vec<StepRecord>,
    states: Vec<Vec<f64>>,
    j_h: f64,
    failure: Option<RunFailure>,
}

/// How the loop picks step sizes: controller-driven, or a uniform node
/// schedule (computed from the index, so roundoff cannot add a trailing
/// sliver step).
enum StepPlan {
    Adaptive { dt0: f64 },
    Fixed { n: usize },
}

/// Core loop shared by the adaptive and fixed-step drivers.
fn run_loop(
    problem: &IvpProblem,
    pair: &SchemePair,
    j: &DensityFunction,
    rule: &QuadratureRule,
    cfg: &ControllerConfig,
    plan: StepPlan,
    max_steps: usize,
) -> LoopOutcome {
    let mut steps = Vec::new();
    let mut states = vec![problem.u0.clone()];
    let span = problem.te - problem.t0;
    let mut t = problem.t0;
    let mut u = problem.u0.clone();
    let mut j_prev = j.eval(t, &u);
    let mut j_h = 0.0;
    let mut failure = None;
    let mut dt = match plan {
        StepPlan::Adaptive { dt0 } => dt0,
        StepPlan::Fixed { .. } => 0.0,
    };

    loop {
        if steps.len() >= max_steps {
            failure = Some(RunFailure::StepBudget { t });
            break;
        }
        // The last step lands exactly on te: shrunk to fit for the adaptive
        // plan, scheduled by node index for the fixed one.
        let (dt_n, t_next, last) = match plan {
            StepPlan::Fixed { n } => {
                let i = steps.len() + 1;
                let t_next = if i == n { problem.te } else { problem.t0 + span * i as f64 / n as f64 };
                (t_next - t, t_next, i == n)
            }
            StepPlan::Adaptive { .. } => {
                let remaining = problem.te - t;
                if dt >= remaining {
                    (remaining, problem.te, true)
                } else {
                    (dt, t + dt, false)
                }
            }
        };

        let step = match pair_step(problem, t, &u, dt_n, pair) {
            Ok(s) => s,
            Err(Error::BlowUp { t, dt }) => {
                failure = Some(RunFailure::BlowUp { t, dt });
                break;
            }
            Err(Error::SingularSystem { t, dt }) => {
                failure = Some(RunFailure::SingularSystem { t, dt });
                break;
            }
            Err(_) => unreachable!("step preconditions are validated up front"),
        };

        let est = match cfg.variant {
            EstimatorVariant::Classic => classic_estimate(&step, cfg.norm),
            EstimatorVariant::Goal => goal_estimate(j, t_next, &step),
        };

        let j_next = j.eval(t_next, &step.u_high);
        let inc = match rule {
            QuadratureRule::Trapezoid => rule.step_increment(dt_n, &[j_prev, j_next]),
            QuadratureRule::Simpson => {
                let mid = step.dense_at(0.5).expect("validated up front");
                let j_mid = j.eval(t + 0.5 * dt_n, mid);
                rule.step_increment(dt_n, &[j_prev, j_mid, j_next])
            }
        }
        .expect("node counts match the rule");
        j_h += inc;

        steps.push(StepRecord { t, dt: dt_n, estimate: est.value, zero_estimate: est.zero });
        states.push(step.u_high.clone());
        u = step.u_high;
        t = t_next;
        j_prev = j_next;

        if last {
            break;
        }
        if matches!(plan, StepPlan::Adaptive { .. }) {
            dt = deadbeat_next_step(dt_n, &est, cfg);
        }
    }

    LoopOutcome { steps, states, j_h, failure }
}

fn finish_report(
    problem: &IvpProblem,
    tau: Option<f64>,
    outcome: LoopOutcome,
    started: Instant,
) -> RunReport {
    let err_solution_te = if outcome.failure.is_none() {
        problem
            .exact_state(problem.te)
            .map(|exact| linalg::norm2(&linalg::sub(outcome.states.last().unwrap(), &exact)))
    } else {
        None
    };
    RunReport {
        tau,
        n_steps: outcome.steps.len(),
        steps: outcome.steps,
        states: outcome.states,
        j_h: outcome.j_h,
        err_qoi: None,
        err_solution_te,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        failure: outcome.failure,
    }
}

/// Integrates the problem adaptively under the given controller settings and
/// accumulates the quantity of interest along the way.
///
/// Runtime integration failures (blow-up, singular implicit system, exhausted
/// step budget) are reported through `RunReport::failure` together with the
/// partial results; `Err` is reserved for configuration errors.
pub fn adaptive_solve(
    problem: &IvpProblem,
    pair: &SchemePair,
    j: &DensityFunction,
    rule: &QuadratureRule,
    cfg: &ControllerConfig,
) -> Result<RunReport> {
    adaptive_solve_bounded(problem, pair, j, rule, cfg, DEFAULT_MAX_STEPS)
}

/// `adaptive_solve` with an explicit step budget.
pub fn adaptive_solve_bounded(
    problem: &IvpProblem,
    pair: &SchemePair,
    j: &DensityFunction,
    rule: &QuadratureRule,
    cfg: &ControllerConfig,
    max_steps: usize,
) -> Result<RunReport> {
    let started = Instant::now();
    cfg.validate()?;
    validate_run_inputs(problem, pair, j, rule)?;
    let dt0 = initial_step(cfg.tau, cfg.p_hat, problem.te - problem.t0);
    let outcome = run_loop(problem, pair, j, rule, cfg, StepPlan::Adaptive { dt0 }, max_steps);
    Ok(finish_report(problem, Some(cfg.tau), outcome, started))
}

/// Integrates on a uniform grid of `n_steps` steps, recording estimates but
/// ignoring them for control. Accumulation matches the adaptive path exactly.
pub fn fixed_step_solve(
    problem: &IvpProblem,
    pair: &SchemePair,
    j: &DensityFunction,
    rule: &QuadratureRule,
    n_steps: usize,
) -> Result<RunReport> {
    let started = Instant::now();
    if n_steps == 0 {
        return Err(Error::Config("need at least one step".into()));
    }
    validate_run_inputs(problem, pair, j, rule)?;
    // The controller is inert here; any valid settings will do.
    let cfg = ControllerConfig::for_pair(1.0, pair, EstimatorVariant::Classic)?;
    let outcome = run_loop(problem, pair, j, rule, &cfg, StepPlan::Fixed { n: n_steps }, n_steps);
    Ok(finish_report(problem, None, outcome, started))
}
