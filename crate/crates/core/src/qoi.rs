//! Density functions and the per-step quadrature that accumulates the
//! time-integrated quantity of interest.
//!
//! The discrete quantity is `J_h = sum_n dt_n * sum_k sigma_k j(t_n^(k), u_n^(k))`
//! with quadrature nodes placed at fractions `gamma_k` of each step; the node
//! weights `sigma_k` sum to one so the step weight is carried by `dt_n` alone.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

type DensityFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// The density `j(t, u)` under the time integral.
///
/// `linear_weights` is set when `j(t, u) = w^T u` with a constant nonnegative
/// weight vector; the goal-oriented estimator works for any density, but the
/// dual-weighted refinement loop and the nullspace analysis need the linear
/// form explicitly.
#[derive(Clone)]
pub struct DensityFunction {
    pub label: String,
    eval: DensityFn,
    pub linear_weights: Option<Vec<f64>>,
}

impl fmt::Debug for DensityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityFunction")
            .field("label", &self.label)
            .field("linear_weights", &self.linear_weights)
            .finish()
    }
}

impl DensityFunction {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        linear_weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        if let Some(w) = &linear_weights {
            if w.is_empty() || w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Config(
                    "linear density weights must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(DensityFunction { label: label.into(), eval: Arc::new(eval), linear_weights })
    }

    /// Density `j(t, u) = w^T u` for a constant weight vector.
    pub fn linear(label: impl Into<String>, w: Vec<f64>) -> Result<Self> {
        let wc = w.clone();
        DensityFunction::new(
            label,
            move |_t, u: &[f64]| wc.iter().zip(u).map(|(a, b)| a * b).sum(),
            Some(w),
        )
    }

    pub fn eval(&self, t: f64, u: &[f64]) -> f64 {
        (self.eval)(t, u)
    }
}

/// Built-in densities for the 2x2 test problem. Labels: `u1`, `u2`, `u1+u2`,
/// `t*u1`, `exp(-t)*u2`.
pub fn toy_density(label: &str) -> Result<DensityFunction> {
    match label {
        "u1" => DensityFunction::linear("u1", vec![1.0, 0.0]),
        "u2" => DensityFunction::linear("u2", vec![0.0, 1.0]),
        "u1+u2" => DensityFunction::linear("u1+u2", vec![1.0, 1.0]),
        "t*u1" => DensityFunction::new("t*u1", |t, u| t * u[0], None),
        "exp(-t)*u2" => DensityFunction::new("exp(-t)*u2", |t, u| (-t).exp() * u[1], None),
        _ => Err(Error::Unsupported(format!("unknown density label {label:?}"))),
    }
}

/// Per-step quadrature rule. Node fractions and weights are fixed:
/// trapezoid uses the step endpoints, Simpson adds the midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    Trapezoid,
    Simpson,
}

impl QuadratureRule {
    pub fn id(&self) -> &'static str {
        match self {
            QuadratureRule::Trapezoid => "trapezoid",
            QuadratureRule::Simpson => "simpson",
        }
    }

    /// Order of the composite rule.
    pub fn order(&self) -> u32 {
        match self {
            QuadratureRule::Trapezoid => 2,
            QuadratureRule::Simpson => 4,
        }
    }

    /// Node positions as fractions of the step.
    pub fn nodes(&self) -> &'static [f64] {
        match self {
            QuadratureRule::Trapezoid => &[0.0, 1.0],
            QuadratureRule::Simpson => &[0.0, 0.5, 1.0],
        }
    }

    /// Node weights; they sum to one.
    pub fn weights(&self) -> &'static [f64] {
        match self {
            QuadratureRule::Trapezoid => &[0.5, 0.5],
            QuadratureRule::Simpson => &[1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0],
        }
    }

    /// Contribution of one step given the density values at the rule's nodes.
    pub fn step_increment(&self, dt: f64, j_values: &[f64]) -> Result<f64> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::Config("step size must be finite and nonnegative".into()));
        }
        let w = self.weights();
        if j_values.len() != w.len() {
            return Err(Error::Config(format!(
                "{} rule expects {} node values, got {}",
                self.id(),
                w.len(),
                j_values.len()
            )));
        }
        Ok(dt * w.iter().zip(j_values).map(|(s, j)| s * j).sum::<f64>())
    }
}

impl FromStr for QuadratureRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trapezoid" => Ok(QuadratureRule::Trapezoid),
            "simpson" => Ok(QuadratureRule::Simpson),
            _ => Err(Error::Config(format!("unknown quadrature rule {s:?}"))),
        }
    }
}

/// States of one step at the quadrature nodes. `mid` is required by Simpson
/// and ignored by the trapezoid rule.
#[derive(Debug, Clone, Copy)]
pub struct StepStates<'a> {
    pub t: f64,
    pub dt: f64,
    pub start: &'a [f64],
    pub mid: Option<&'a [f64]>,
    pub end: &'a [f64],
}

/// Accumulates `J_h` over a run. Endpoint density values shared by adjacent
/// steps are evaluated once per node.
pub fn accumulate(
    steps: &[StepStates<'_>],
    j: &DensityFunction,
    rule: &QuadratureRule,
) -> Result<f64> {
    let mut total = 0.0;
    let mut carry: Option<(f64, f64)> = None; // (t_end, j_end) of the previous step
    for s in steps {
        let j_start = match carry {
            Some((t_prev, j_prev)) if t_prev == s.t => j_prev,
            _ => j.eval(s.t, s.start),
        };
        let t_end = s.t + s.dt;
        let j_end = j.eval(t_end, s.end);
        let inc = match rule {
            QuadratureRule::Trapezoid => rule.step_increment(s.dt, &[j_start, j_end])?,
            QuadratureRule::Simpson => {
                let mid = s.mid.ok_or_else(|| {
                    Error::Config("Simpson accumulation needs midpoint states".into())
                })?;
                let j_mid = j.eval(s.t + 0.5 * s.dt, mid);
                rule.step_increment(s.dt, &[j_start, j_mid, j_end])?
            }
        };
        total += inc;
        carry = Some((t_end, j_end));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_weights_sum_to_one() {
        for rule in [QuadratureRule::Trapezoid, QuadratureRule::Simpson] {
            let s: f64 = rule.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
            assert_eq!(rule.nodes().len(), rule.weights().len());
        }
    }

    #[test]
    fn step_increments_match_hand_values() {
        // Constant density 1 over dt = 0.2 contributes 0.2 under either rule.
        let t = QuadratureRule::Trapezoid;
        assert!((t.step_increment(0.2, &[1.0, 1.0]).unwrap() - 0.2).abs() < 1e-16);
        let s = QuadratureRule::Simpson;
        assert!((s.step_increment(0.2, &[1.0, 1.0, 1.0]).unwrap() - 0.2).abs() < 1e-16);
        // Trapezoid: dt (j0 + j1) / 2.
        assert_eq!(t.step_increment(0.5, &[1.0, 3.0]).unwrap(), 1.0);
        // Simpson: dt (j0 + 4 jm + j1) / 6.
        assert_eq!(s.step_increment(0.6, &[1.0, 2.0, 3.0]).unwrap(), 1.2);
    }

    #[test]
    fn wrong_node_count_is_a_config_error() {
        let s = QuadratureRule::Simpson;
        assert!(matches!(
            s.step_increment(0.1, &[1.0, 2.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn simpson_accumulate_without_midpoints_is_a_config_error() {
        let j = toy_density("u1").unwrap();
        let u = [1.0, 0.0];
        let steps = [StepStates { t: 0.0, dt: 0.5, start: &u, mid: None, end: &u }];
        assert!(matches!(
            accumulate(&steps, &j, &QuadratureRule::Simpson),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn empty_window_accumulates_to_zero() {
        let j = toy_density("u1").unwrap();
        assert_eq!(accumulate(&[], &j, &QuadratureRule::Trapezoid).unwrap(), 0.0);
    }

    #[test]
    fn rules_are_exact_on_their_polynomial_degree() {
        // j depends on t only; integrate t (trapezoid-exact) and t^3
        // (Simpson-exact) over [0, 1], split at an uneven point.
        let lin = DensityFunction::new("t", |t, _| t, None).unwrap();
        let cub = DensityFunction::new("t^3", |t, _| t * t * t, None).unwrap();
        let u: [f64; 1] = [0.0];
        let split = |a: f64, b: f64| StepStates {
            t: a,
            dt: b - a,
            start: &u,
            mid: Some(&u),
            end: &u,
        };
        let steps = [split(0.0, 0.375), split(0.375, 1.0)];
        let jt = accumulate(&steps, &lin, &QuadratureRule::Trapezoid).unwrap();
        assert!((jt - 0.5).abs() < 1e-15);
        let jc = accumulate(&steps, &cub, &QuadratureRule::Simpson).unwrap();
        assert!((jc - 0.25).abs() < 1e-15);
        // Splitting a step does not change an exactly integrated polynomial.
        let jc_whole = accumulate(&[split(0.0, 1.0)], &cub, &QuadratureRule::Simpson).unwrap();
        assert!((jc - jc_whole).abs() < 1e-15);
    }

    #[test]
    fn linear_density_matches_its_weights() {
        let j = DensityFunction::linear("w", vec![2.0, 0.5, 1.0]).unwrap();
        assert_eq!(j.eval(3.0, &[1.0, 2.0, 4.0]), 7.0);
        assert!(DensityFunction::linear("bad", vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn toy_density_catalog() {
        let u = [2.0, 3.0];
        assert_eq!(toy_density("u1").unwrap().eval(0.7, &u), 2.0);
        assert_eq!(toy_density("u2").unwrap().eval(0.7, &u), 3.0);
        assert_eq!(toy_density("u1+u2").unwrap().eval(0.7, &u), 5.0);
        assert_eq!(toy_density("t*u1").unwrap().eval(0.5, &u), 1.0);
        let e = toy_density("exp(-t)*u2").unwrap().eval(1.0, &u);
        assert!((e - 3.0 * (-1.0_f64).exp()).abs() < 1e-15);
        assert!(toy_density("u3").is_err());
        // The time-weighted variants are not linear with constant weights.
        assert!(toy_density("t*u1").unwrap().linear_weights.is_none());
    }
}
