//! Local-error estimators and the deadbeat step-size controller.
//!
//! Steps are never rejected: every step is accepted as computed and the
//! estimate only shapes the next step size. The controller aims the
//! companion's local error per unit interval at the tolerance,
//! `dt_next = dt * (tau / est)^(1 / (p_hat + 1))`, optionally limited to the
//! factor range `[f_min, f_max]` per step.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrators::StepOutput;
use crate::linalg;
use crate::qoi::DensityFunction;
use crate::schemes::SchemePair;

/// Which local-error measure drives the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorVariant {
    /// Norm of the difference of the two embedded solutions.
    Classic,
    /// Difference of the density applied to the two embedded solutions.
    Goal,
}

impl fmt::Display for EstimatorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorVariant::Classic => "classic",
            EstimatorVariant::Goal => "goal",
        })
    }
}

impl FromStr for EstimatorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(EstimatorVariant::Classic),
            "goal" => Ok(EstimatorVariant::Goal),
            _ => Err(Error::Config(format!("unknown estimator variant {s:?}"))),
        }
    }
}

/// Vector norm used by the classic estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormKind {
    #[default]
    Euclidean,
    MaxAbs,
}

impl NormKind {
    pub fn apply(&self, x: &[f64]) -> f64 {
        match self {
            NormKind::Euclidean => linalg::norm2(x),
            NormKind::MaxAbs => linalg::norm_inf(x),
        }
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(NormKind::Euclidean),
            "max" => Ok(NormKind::MaxAbs),
            _ => Err(Error::Config(format!("unknown norm {s:?}"))),
        }
    }
}

/// Step-size controller settings.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    /// Target local error per unit interval, per step.
    pub tau: f64,
    /// Order of the companion solution; the controller exponent is
    /// `1 / (p_hat + 1)`.
    pub p_hat: u32,
    pub f_min: f64,
    pub f_max: f64,
    pub limiter_enabled: bool,
    pub variant: EstimatorVariant,
    pub norm: NormKind,
}

impl ControllerConfig {
    pub fn new(tau: f64, p_hat: u32, variant: EstimatorVariant) -> Result<Self> {
        let cfg = ControllerConfig {
            tau,
            p_hat,
            f_min: 0.01,
            f_max: 3.0,
            limiter_enabled: true,
            variant,
            norm: NormKind::Euclidean,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Settings for a scheme pair, taking `p_hat` from its companion order.
    pub fn for_pair(tau: f64, pair: &SchemePair, variant: EstimatorVariant) -> Result<Self> {
        Self::new(tau, pair.embedded_order(), variant)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.p_hat == 0 {
            return Err(Error::Config("companion order must be at least 1".into()));
        }
        if !(self.f_min > 0.0 && self.f_min < 1.0 && self.f_max > 1.0 && self.f_max.is_finite()) {
            return Err(Error::Config(format!(
                "limiter bounds need 0 < f_min < 1 < f_max, got [{}, {}]",
                self.f_min, self.f_max
            )));
        }
        Ok(())
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    pub fn with_limiter(mut self, enabled: bool) -> Self {
        self.limiter_enabled = enabled;
        self
    }

    pub fn with_norm(mut self, norm: NormKind) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_variant(mut self, variant: EstimatorVariant) -> Self {
        self.variant = variant;
        self
    }
}

/// One local-error estimate. `zero` marks an estimate that was exactly zero,
/// in which case the controller falls back to its maximum growth factor.
#[derive(Debug, Clone, Copy)]
pub struct EstimateRecord {
    pub value: f64,
    pub variant: EstimatorVariant,
    pub zero: bool,
}

/// `|u_low - u_high|` in the configured norm.
pub fn classic_estimate(step: &StepOutput, norm: NormKind) -> EstimateRecord {
    let value = norm.apply(&linalg::sub(&step.u_low, &step.u_high));
    EstimateRecord { value, variant: EstimatorVariant::Classic, zero: value == 0.0 }
}

/// `|j(t_next, u_low) - j(t_next, u_high)|`: the local error measured through
/// the density at the end of the step. Components outside the density's view
/// contribute nothing.
pub fn goal_estimate(j: &DensityFunction, t_next: f64, step: &StepOutput) -> EstimateRecord {
    let value = (j.eval(t_next, &step.u_low) - j.eval(t_next, &step.u_high)).abs();
    EstimateRecord { value, variant: EstimatorVariant::Goal, zero: value == 0.0 }
}

/// Deadbeat update: `dt * (tau / est)^(1 / (p_hat + 1))`, with the growth
/// factor clipped to `[f_min, f_max]` when the limiter is on. A zero estimate
/// always yields the maximum growth factor, limiter or not.
pub fn deadbeat_next_step(dt: f64, est: &EstimateRecord, cfg: &ControllerConfig) -> f64 {
    let ind = if est.value == 0.0 {
        cfg.f_max
    } else {
        (cfg.tau / est.value).powf(1.0 / (cfg.p_hat as f64 + 1.0))
    };
    let factor = if cfg.limiter_enabled {
        ind.min(cfg.f_max).max(cfg.f_min)
    } else {
        ind
    };
    dt * factor
}

/// First step size `tau^(1 / (p_hat + 1))`, clamped to the window length.
pub fn initial_step(tau: f64, p_hat: u32, span: f64) -> f64 {
    tau.powf(1.0 / (p_hat as f64 + 1.0)).min(span)
}
