//! Experiment description shared by all subcommands: a flat JSON file whose
//! keys can each be overridden by the command-line flag of the same name.

use std::fs;
use std::path::PathBuf;

use serde::Deserialize;

use qoi_adapt::analysis::QoiReference;
use qoi_adapt::control::{ControllerConfig, EstimatorVariant};
use qoi_adapt::problems::{
    convdiff_1d, convdiff_window_density, toy_exact_qoi, toy_problem, ConvDiffParams, IvpProblem,
};
use qoi_adapt::qoi::{toy_density, DensityFunction, QuadratureRule};
use qoi_adapt::schemes::{builtin_rk4_pair, builtin_theta_pair, SchemePair};
use qoi_adapt::{Error, Result};

/// Spatial resolution used for the transport problem. Fixed rather than
/// configurable: the experiments compare time integrators on one fixed
/// spatial discretization.
const CONVDIFF_CELLS: usize = 60;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiment {
    pub problem: String,
    /// Toy stiffness; for the transport problem, the direction sign (+1/-1).
    pub k: f64,
    pub scheme: String,
    /// Density label; defaults to "u1" on the toy problem and to the
    /// observation-window mean on the transport problem.
    pub density: Option<String>,
    pub quadrature: String,
    pub variant: String,
    pub tau: Vec<f64>,
    pub limiter: bool,
    /// Iteration budget for the refinement loop.
    pub dwr_max_iter: usize,
    /// Worker threads for sweep rows.
    pub jobs: usize,
    pub out: Option<PathBuf>,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            problem: "toy".into(),
            k: -1.0,
            scheme: "theta".into(),
            density: None,
            quadrature: "trapezoid".into(),
            variant: "goal".into(),
            tau: vec![1e-6],
            limiter: true,
            dwr_max_iter: 40,
            jobs: 1,
            out: None,
        }
    }
}

impl Experiment {
    pub fn load(path: Option<&PathBuf>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Experiment::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn resolve(&self) -> Result<Resolved> {
        if self.tau.is_empty() {
            return Err(Error::Config("tau list must be non-empty".into()));
        }
        for &t in &self.tau {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!("tolerances must be positive, got {t}")));
            }
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.dwr_max_iter == 0 {
            return Err(Error::Config("dwr_max_iter must be at least 1".into()));
        }

        let (problem, density, reference) = match self.problem.as_str() {
            "toy" => {
                let problem = toy_problem(self.k)?;
                let label = self.density.as_deref().unwrap_or("u1");
                let density = toy_density(label)?;
                let j_ref = toy_exact_qoi(self.k, label, problem.t0, problem.te)?;
                (problem, density, QoiReference::Exact(j_ref))
            }
            "convdiff" => {
                let params = ConvDiffParams::standard(CONVDIFF_CELLS, self.k)?;
                let problem = convdiff_1d(&params)?;
                let density = convdiff_window_density(&params)?;
                if let Some(label) = self.density.as_deref() {
                    if label != density.label {
                        return Err(Error::Config(format!(
                            "unknown density label {label:?} for convdiff; it has only {:?}",
                            density.label
                        )));
                    }
                }
                (problem, density, QoiReference::ClassicAdaptive)
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown problem id {other:?}; expected \"toy\" or \"convdiff\""
                )));
            }
        };

        let pair = match self.scheme.as_str() {
            "theta" => builtin_theta_pair(),
            "rk4" => builtin_rk4_pair(),
            other => {
                return Err(Error::Config(format!(
                    "unknown scheme id {other:?}; expected \"theta\" or \"rk4\""
                )));
            }
        };

        let rule: QuadratureRule = self.quadrature.parse()?;
        let variant: EstimatorVariant = self.variant.parse()?;
        let controller =
            ControllerConfig::for_pair(self.tau[0], &pair, variant)?.with_limiter(self.limiter);

        Ok(Resolved {
            problem,
            pair,
            density,
            rule,
            controller,
            reference,
            tau: self.tau.clone(),
            dwr_max_iter: self.dwr_max_iter,
            jobs: self.jobs,
            out: self.out.clone(),
        })
    }
}

/// Experiment with every id looked up in its catalog. The controller holds
/// the first tolerance; sweeps re-arm it per row.
pub struct Resolved {
    pub problem: IvpProblem,
    pub pair: SchemePair,
    pub density: DensityFunction,
    pub rule: QuadratureRule,
    pub controller: ControllerConfig,
    pub reference: QoiReference,
    pub tau: Vec<f64>,
    pub dwr_max_iter: usize,
    pub jobs: usize,
    pub out: Option<PathBuf>,
}

impl Resolved {
    /// The commands that integrate once take exactly one tolerance.
    pub fn single_tau(&self, command: &str) -> Result<f64> {
        if self.tau.len() != 1 {
            return Err(Error::Config(format!(
                "{command} takes exactly one tolerance, got {}",
                self.tau.len()
            )));
        }
        Ok(self.tau[0])
    }
}
