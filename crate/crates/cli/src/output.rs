//! CSV rendering. Numbers are written in their shortest round-trip decimal
//! form, so re-parsing a summary line recovers the in-memory values exactly;
//! the only nondeterministic column is `wall_ms`, always placed last.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use qoi_adapt::analysis::SweepRow;
use qoi_adapt::driver::{RunReport, DEFAULT_MAX_STEPS};
use qoi_adapt::dwr::DwrOutcome;
use qoi_adapt::{Error, Result};

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes to the `--out` path, or stdout when it is absent.
pub fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|()| lock.flush())
                .map_err(|e| Error::Config(format!("cannot write to stdout: {e}")))
        }
    }
}

/// Per-step trace plus a two-line summary footer. A failed run keeps the
/// steps taken so far and records the failure in a third footer line.
pub fn run_csv(tau: f64, report: &RunReport) -> String {
    let mut s = String::from("t,dt,est,zero_flag\n");
    for step in &report.steps {
        s.push_str(&format!(
            "{},{},{},{}\n",
            num(step.t),
            num(step.dt),
            num(step.estimate),
            u8::from(step.zero_estimate)
        ));
    }
    s.push_str("# tau,N,J_h,e_J,e_sol_te,wall_ms\n");
    s.push_str(&format!(
        "# {},{},{},{},{},{}\n",
        num(tau),
        report.n_steps,
        num(report.j_h),
        opt(report.err_qoi),
        opt(report.err_solution_te),
        num(report.wall_ms)
    ));
    if let Some(failure) = report.failure {
        s.push_str(&format!("# failure: {}\n", failure.to_error(DEFAULT_MAX_STEPS)));
    }
    s
}

/// One row per tolerance, then the fitted QoI-error order as a footer.
pub fn sweep_csv(rows: &[SweepRow], slope: &str) -> String {
    let mut s = String::from("tau,n_steps,J_h,err_J,err_sol_te,wall_ms\n");
    for row in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            num(row.tau),
            row.n_steps,
            num(row.j_h),
            opt(row.err_qoi),
            opt(row.err_solution_te),
            num(row.wall_ms)
        ));
    }
    s.push_str(&format!("# slope,{slope}\n"));
    s
}

/// Refinement trace; written whether or not the loop converged.
pub fn dwr_csv(outcome: &DwrOutcome) -> String {
    let mut s = String::from("iter,cells,eta,J_h,e_J\n");
    for it in &outcome.trace {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            it.iteration,
            it.cells,
            num(it.eta),
            num(it.j_h),
            opt(it.err_qoi)
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_through_their_text_form() {
        for &x in &[1e-6, 0.1 + 0.2, f64::MIN_POSITIVE, 12345.678901234567, -3.5e300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(opt(None), "");
        assert_eq!(opt(Some(2.5)), "2.5");
    }
}
