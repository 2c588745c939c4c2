//! Command-line front end. Exit codes: 0 success, 1 failed verification
//! check, 2 configuration error, 3 refinement loop did not converge,
//! 4 runtime failure (blow-up, singular system, step budget).

mod check;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qoi_adapt::analysis::{qoi_error_slope, sweep_reference, sweep_row, SweepResult, SweepRow};
use qoi_adapt::analysis::QoiReference;
use qoi_adapt::driver::{adaptive_solve, DEFAULT_MAX_STEPS};
use qoi_adapt::dwr::{dwr_loop, DwrConfig};
use qoi_adapt::{Error, Result};

use config::{Experiment, Resolved};

#[derive(Parser)]
#[command(name = "qoi-adapt", version, about = "Adaptive time integration driven by a quantity of interest")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One adaptive run: per-step trace CSV plus a summary footer
    Run(ExperimentArgs),
    /// One run per tolerance: CSV table plus a fitted-order footer
    Sweep(ExperimentArgs),
    /// Adjoint-weighted refinement loop: iteration trace CSV
    Dwr(ExperimentArgs),
    /// Verification battery: order conditions, seminorm examples, exact-solution residuals
    Check(CheckArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat JSON experiment file; each key can be overridden by the flag of the same name
    config: Option<PathBuf>,
    /// Problem id: "toy" or "convdiff"
    #[arg(long)]
    problem: Option<String>,
    /// Toy stiffness, or transport direction sign for convdiff
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    /// Scheme id: "theta" or "rk4"
    #[arg(long)]
    scheme: Option<String>,
    /// Density label from the problem's catalog
    #[arg(long)]
    density: Option<String>,
    /// Quadrature id: "trapezoid" or "simpson"
    #[arg(long)]
    quadrature: Option<String>,
    /// Error estimator: "classic" or "goal"
    #[arg(long)]
    variant: Option<String>,
    /// Tolerance; repeat the flag for sweep rows
    #[arg(long = "tau")]
    tau: Vec<f64>,
    /// Disable the step-ratio limiter
    #[arg(long)]
    no_limiter: bool,
    /// Iteration budget for the refinement loop
    #[arg(long)]
    dwr_max_iter: Option<usize>,
    /// Worker threads for sweep rows
    #[arg(long)]
    jobs: Option<usize>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Perturb one partial-step weight first; the battery must catch it
    #[arg(long, hide = true)]
    tamper: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<Resolved> {
        let mut exp = Experiment::load(self.config.as_ref())?;
        if let Some(v) = &self.problem {
            exp.problem = v.clone();
        }
        if let Some(v) = self.k {
            exp.k = v;
        }
        if let Some(v) = &self.scheme {
            exp.scheme = v.clone();
        }
        if let Some(v) = &self.density {
            exp.density = Some(v.clone());
        }
        if let Some(v) = &self.quadrature {
            exp.quadrature = v.clone();
        }
        if let Some(v) = &self.variant {
            exp.variant = v.clone();
        }
        if !self.tau.is_empty() {
            exp.tau = self.tau.clone();
        }
        if self.no_limiter {
            exp.limiter = false;
        }
        if let Some(v) = self.dwr_max_iter {
            exp.dwr_max_iter = v;
        }
        if let Some(v) = self.jobs {
            exp.jobs = v;
        }
        if let Some(v) = &self.out {
            exp.out = Some(v.clone());
        }
        exp.resolve()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Dwr(args) => cmd_dwr(&args),
        Command::Check(args) => check::run(args.tamper),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::BlowUp { .. } | Error::SingularSystem { .. } | Error::StepBudget { .. } => 4,
                _ => 2,
            })
        }
    }
}

fn cmd_run(args: &ExperimentArgs) -> Result<u8> {
    let r = args.resolve()?;
    let tau = r.single_tau("run")?;
    let controller = r.controller.clone().with_tau(tau)?;
    let mut report = adaptive_solve(&r.problem, &r.pair, &r.density, &r.rule, &controller)?;
    if report.failure.is_none() {
        if let QoiReference::Exact(j_ref) = r.reference {
            report.err_qoi = Some((j_ref - report.j_h).abs());
        }
    }
    output::emit(r.out.as_ref(), &output::run_csv(tau, &report))?;
    match report.failure {
        None => Ok(0),
        Some(failure) => {
            eprintln!("error: {}", failure.to_error(DEFAULT_MAX_STEPS));
            Ok(4)
        }
    }
}

fn cmd_sweep(args: &ExperimentArgs) -> Result<u8> {
    let r = args.resolve()?;
    if r.tau.len() < 2 {
        return Err(Error::Config(format!(
            "sweep needs at least two tolerances, got {}",
            r.tau.len()
        )));
    }
    let mut taus = r.tau.clone();
    taus.sort_by(|a, b| b.partial_cmp(a).expect("tolerances are validated finite"));

    let j_ref = sweep_reference(
        &r.problem,
        &r.pair,
        &r.density,
        &r.rule,
        &r.controller,
        &taus,
        r.reference,
    )?;
    let rows = sweep_rows(&r, &taus, j_ref)?;

    let result = SweepResult { rows, j_reference: j_ref };
    let slope = match qoi_error_slope(&result) {
        Ok(fit) => output::num(fit.slope),
        Err(err) => format!("unavailable ({err})"),
    };
    output::emit(r.out.as_ref(), &output::sweep_csv(&result.rows, &slope))?;

    match result.rows.iter().find_map(|row| row.failure) {
        None => Ok(0),
        Some(failure) => {
            eprintln!("error: {}", failure.to_error(DEFAULT_MAX_STEPS));
            Ok(4)
        }
    }
}

/// Computes the rows, `jobs` at a time. Rows are independent and land at
/// their tolerance's index, so the output order never depends on `jobs`.
fn sweep_rows(r: &Resolved, taus: &[f64], j_ref: f64) -> Result<Vec<SweepRow>> {
    let jobs = r.jobs.min(taus.len()).max(1);
    let row =
        |tau: f64| sweep_row(&r.problem, &r.pair, &r.density, &r.rule, &r.controller, tau, j_ref);
    if jobs == 1 {
        return taus.iter().map(|&tau| row(tau)).collect();
    }
    let mut slots: Vec<Option<Result<SweepRow>>> = Vec::new();
    slots.resize_with(taus.len(), || None);
    std::thread::scope(|scope| {
        let mut workers = Vec::new();
        for offset in 0..jobs {
            let row = &row;
            workers.push(scope.spawn(move || {
                let mut part = Vec::new();
                let mut i = offset;
                while i < taus.len() {
                    part.push((i, row(taus[i])));
                    i += jobs;
                }
                part
            }));
        }
        for worker in workers {
            for (i, computed) in worker.join().expect("sweep worker panicked") {
                slots[i] = Some(computed);
            }
        }
    });
    slots.into_iter().map(|slot| slot.expect("every index was assigned a worker")).collect()
}

fn cmd_dwr(args: &ExperimentArgs) -> Result<u8> {
    let r = args.resolve()?;
    let tau = r.single_tau("dwr")?;
    let weights = r.density.linear_weights.clone().ok_or_else(|| {
        Error::Config(format!(
            "dwr needs a density with linear weights; {:?} has none",
            r.density.label
        ))
    })?;
    let mut cfg = DwrConfig::new(tau)?;
    cfg.max_iterations = r.dwr_max_iter;
    let reference = match r.reference {
        QoiReference::Exact(v) => Some(v),
        QoiReference::ClassicAdaptive => None,
    };
    let outcome = dwr_loop(&r.problem, &weights, &cfg, reference)?;
    output::emit(r.out.as_ref(), &output::dwr_csv(&outcome))?;
    if outcome.converged {
        Ok(0)
    } else {
        eprintln!(
            "error: refinement loop stopped at eta = {} after {} iterations without reaching tau = {}",
            outcome.eta,
            outcome.trace.len(),
            tau
        );
        Ok(3)
    }
}
