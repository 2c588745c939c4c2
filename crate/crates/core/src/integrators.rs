//! Single-step execution of an embedded pair: both solutions, any
//! partial-step values, and the stage derivatives they were built from.

use crate::error::{Error, Result};
use crate::linalg::{self};
use crate::problems::{IvpProblem, LinearRhs};
use crate::schemes::{ButcherTableau, DenseWeights, EmbeddedWeights, SchemePair};

/// Everything one step of an embedded pair produces. `u_high` is the solution
/// that gets propagated; `u_low` only feeds the error estimate. `dense` holds
/// `(gamma, state)` pairs for the partial-step values the pair supports.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub u_high: Vec<f64>,
    pub u_low: Vec<f64>,
    pub dense: Vec<(f64, Vec<f64>)>,
    /// Stage derivatives of the explicit path; empty for the implicit pair.
    pub stage_derivatives: Vec<Vec<f64>>,
}

impl StepOutput {
    pub fn dense_at(&self, gamma: f64) -> Option<&[f64]> {
        self.dense
            .iter()
            .find(|(g, _)| (g - gamma).abs() < 1e-15)
            .map(|(_, u)| u.as_slice())
    }
}

fn check_step_inputs(t: f64, u: &[f64], dt: f64, dim: usize) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() || !t.is_finite() {
        return Err(Error::Config(format!("need a positive finite step, got dt = {dt}")));
    }
    if u.len() != dim {
        return Err(Error::Config(format!(
            "state length {} does not match problem dimension {dim}",
            u.len()
        )));
    }
    Ok(())
}

/// One explicit Runge-Kutta step from `(t, u)` with step size `dt`, producing
/// the main solution, the embedded companion, and one partial-step value per
/// dense weight set, all from the same stage derivatives.
pub fn explicit_rk_step(
    problem: &IvpProblem,
    t: f64,
    u: &[f64],
    dt: f64,
    tableau: &ButcherTableau,
    embedded: &EmbeddedWeights,
    dense_weights: &[DenseWeights],
) -> Result<StepOutput> {
    check_step_inputs(t, u, dt, problem.dim)?;
    let s = tableau.stage_count();
    let dim = problem.dim;
    let blow_up = || Error::BlowUp { t, dt };

    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut arg = vec![0.0; dim];
    for i in 0..s {
        arg.copy_from_slice(u);
        for (j, k) in stages.iter().enumerate() {
            let a = tableau.a[i][j];
            if a != 0.0 {
                linalg::axpy(&mut arg, dt * a, k);
            }
        }
        let mut k = vec![0.0; dim];
        problem.eval_rhs(t + tableau.c[i] * dt, &arg, &mut k);
        if !linalg::all_finite(&k) {
            return Err(blow_up());
        }
        stages.push(k);
    }

    let combine = |weights: &[f64], scale: f64| -> Vec<f64> {
        let mut out = u.to_vec();
        for (w, k) in weights.iter().zip(&stages) {
            if *w != 0.0 {
                linalg::axpy(&mut out, scale * w, k);
            }
        }
        out
    };

    let u_high = combine(&tableau.b, dt);
    let u_low = combine(&embedded.b_hat, dt);
    if !linalg::all_finite(&u_high) || !linalg::all_finite(&u_low) {
        return Err(blow_up());
    }
    let dense = dense_weights
        .iter()
        .map(|d| (d.gamma, combine(&d.b_star, dt)))
        .collect();

    Ok(StepOutput { u_high, u_low, dense, stage_derivatives: stages })
}

/// One theta-method step for the linear problem `u' = A u + g(t)`:
/// `(I - theta dt A) u+ = (I + (1 - theta) dt A) u + dt (theta g(t + dt) + (1 - theta) g(t))`,
/// solved by direct factorization.
pub fn theta_step_linear(
    lin: &LinearRhs,
    t: f64,
    u: &[f64],
    dt: f64,
    theta: f64,
) -> Result<Vec<f64>> {
    let dim = lin.matrix.dim();
    check_step_inputs(t, u, dt, dim)?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Config(format!("theta must lie in [0, 1], got {theta}")));
    }

    let mut rhs = u.to_vec();
    if theta < 1.0 {
        let mut au = vec![0.0; dim];
        lin.matrix.matvec(u, &mut au);
        linalg::axpy(&mut rhs, (1.0 - theta) * dt, &au);
    }
    if let Some(g) = &lin.forcing {
        let mut buf = vec![0.0; dim];
        if theta > 0.0 {
            g(t + dt, &mut buf);
            linalg::axpy(&mut rhs, theta * dt, &buf);
        }
        if theta < 1.0 {
            g(t, &mut buf);
            linalg::axpy(&mut rhs, (1.0 - theta) * dt, &buf);
        }
    }

    let out = match lin.matrix.solve_shifted(theta * dt, &rhs) {
        Err(Error::SingularSystem { .. }) => Err(Error::SingularSystem { t, dt }),
        other => other,
    }?;
    if !linalg::all_finite(&out) {
        return Err(Error::BlowUp { t, dt });
    }
    Ok(out)
}

/// Advances one step of the given pair. The implicit pair requires a linear
/// right-hand side; its midpoint value is the average of the step endpoints.
pub fn pair_step(
    problem: &IvpProblem,
    t: f64,
    u: &[f64],
    dt: f64,
    pair: &SchemePair,
) -> Result<StepOutput> {
    match pair {
        SchemePair::ExplicitRk { tableau, embedded, dense } => {
            explicit_rk_step(problem, t, u, dt, tableau, embedded, dense)
        }
        SchemePair::Theta { main, companion } => {
            let lin = problem.linear_rhs().ok_or_else(|| {
                Error::Config(format!(
                    "the implicit theta pair needs a linear right-hand side, \
                     but {} is not in linear form",
                    problem.label
                ))
            })?;
            let u_high = theta_step_linear(lin, t, u, dt, *main)?;
            let u_low = theta_step_linear(lin, t, u, dt, *companion)?;
            let mid: Vec<f64> =
                u.iter().zip(&u_high).map(|(a, b)| 0.5 * (a + b)).collect();
            Ok(StepOutput {
                u_high,
                u_low,
                dense: vec![(0.5, mid)],
                stage_derivatives: Vec::new(),
            })
        }
    }
}
