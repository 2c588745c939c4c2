//! Post-processing: weighted seminorms, log-log order fitting, tolerance
//! sweeps against a reference value, and step-series diagnostics.

use nalgebra::DMatrix;

use crate::control::{ControllerConfig, EstimatorVariant};
use crate::driver::{adaptive_solve, RunFailure, RunReport, DEFAULT_MAX_STEPS};
use crate::error::{Error, Result};
use crate::problems::IvpProblem;
use crate::qoi::{DensityFunction, QuadratureRule};
use crate::schemes::SchemePair;

/// Nonnegative weights with at least one positive entry. States with support
/// disjoint from the weights have seminorm zero: that nullspace is exactly
/// what a density function cannot see.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Config("weight vector must be non-empty".into()));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("weights must be finite and nonnegative".into()));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::Config("at least one weight must be positive".into()));
        }
        Ok(WeightVector(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weighted seminorm `sum_i w_i |x_i|`.
pub fn seminorm(x: &[f64], w: &WeightVector) -> Result<f64> {
    if x.len() != w.len() {
        return Err(Error::Config(format!(
            "seminorm dimension mismatch: state {} vs weights {}",
            x.len(),
            w.len()
        )));
    }
    Ok(x.iter().zip(w.as_slice()).map(|(xi, wi)| wi * xi.abs()).sum())
}

/// Smallest L with `seminorm(A x, w) <= L * norm1(x)` for all x: the weighted
/// column max, `max_j sum_i w_i |a_ij|`. Note the plain 1-norm on the right;
/// the bound fails in general with the seminorm there.
pub fn lipschitz_seminorm(a: &DMatrix<f64>, w: &WeightVector) -> Result<f64> {
    if a.nrows() != w.len() {
        return Err(Error::Config(format!(
            "matrix has {} rows but the weight vector has {} entries",
            a.nrows(),
            w.len()
        )));
    }
    let mut best = 0.0f64;
    for col in a.column_iter() {
        let s: f64 = col.iter().zip(w.as_slice()).map(|(aij, wi)| wi * aij.abs()).sum();
        best = best.max(s);
    }
    Ok(best)
}

/// Least-squares line through (log x, log y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Points that entered the fit.
    pub used: usize,
    /// Points dropped for non-positive or non-finite error values.
    pub dropped: usize,
}

/// Fits the observed convergence order: the slope of log(y) over log(x).
/// Non-positive or non-finite `ys` entries are dropped (errors at machine
/// zero carry no order information); at least three usable points remain or
/// the fit is refused.
pub fn fit_observed_order(xs: &[f64], ys: &[f64]) -> Result<OrderFit> {
    if xs.len() != ys.len() {
        return Err(Error::Config(format!(
            "order fit needs matching lengths, got {} xs and {} ys",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "order fit needs at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::Config("order fit abscissae must be positive and finite".into()));
    }
    let mut lx = Vec::with_capacity(xs.len());
    let mut ly = Vec::with_capacity(ys.len());
    let mut dropped = 0;
    for (x, y) in xs.iter().zip(ys) {
        if y.is_finite() && *y > 0.0 {
            lx.push(x.ln());
            ly.push(y.ln());
        } else {
            dropped += 1;
        }
    }
    let n = lx.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "order fit has {n} usable points after dropping {dropped} zero-error values"
        )));
    }
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "order fit abscissae are all identical".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok(OrderFit { slope, intercept: my - slope * mx, used: n, dropped })
}

/// One tolerance of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub tau: f64,
    pub n_steps: usize,
    pub j_h: f64,
    /// `|J_ref - J_h|`; `None` when the run failed.
    pub err_qoi: Option<f64>,
    pub err_solution_te: Option<f64>,
    pub wall_ms: f64,
    pub failure: Option<RunFailure>,
}

impl SweepRow {
    fn from_report(tau: f64, report: &RunReport, j_reference: f64) -> SweepRow {
        SweepRow {
            tau,
            n_steps: report.n_steps,
            j_h: report.j_h,
            err_qoi: report.failure.is_none().then(|| (j_reference - report.j_h).abs()),
            err_solution_te: report.err_solution_te,
            wall_ms: report.wall_ms,
            failure: report.failure,
        }
    }
}

/// Sweep rows in order of decreasing tolerance, plus the reference value the
/// errors were measured against.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub j_reference: f64,
}

/// Where the sweep's reference value comes from: a closed form, or a classic
/// adaptive run at a tenth of the tightest tolerance in the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QoiReference {
    Exact(f64),
    ClassicAdaptive,
}

/// Resolves the reference value for a sweep over `taus`.
pub fn sweep_reference(
    problem: &IvpProblem,
    pair: &SchemePair,
    j: &DensityFunction,
    rule: &QuadratureRule,
    base: &ControllerConfig,
    taus: &[f64],
    reference: QoiReference,
) -> Result<f64> {
    match reference {
        QoiReference::Exact(v) => Ok(v),
        QoiReference::ClassicAdaptive => {
            let tau_min = taus.iter().cloned().fold(f64::INFINITY, f64::min);
            let cfg = base
                .clone()
                .with_variant(EstimatorVariant::Classic)
                .with_limiter(true)
                .with_tau(tau_min / 10.0)?;
            let run = adaptive_solve(problem, pair, j, rule, &cfg)?;
            match run.failure {
                None => Ok(run.j_h),
                Some(f) => Err(f.to_error(DEFAULT_MAX_STEPS)),
            }
        }
    }
}

/// Runs one sweep row at tolerance `tau`. Run failures land in the row's
/// failure marker, not in `Err`.
pub fn sweep_row(
    problem: &IvpProblem,
    pair: &SchemePair,
    j: &DensityFunction,
    rule: &QuadratureRule,
    base: &ControllerConfig,
    tau: f64,
    j_reference: f64,
) -> Result<SweepRow> {
    let cfg = base.clone().with_tau(tau)?;
    let report = adaptive_solve(problem, pair, j, rule, &cfg)?;
    Ok(SweepRow::from_report(tau, &report, j_reference))
}

/// One adaptive run per tolerance, largest first. Duplicate tolerances are
/// kept (their rows come out identical); run failures are carried per row.
pub fn sweep(
    problem: &IvpProblem,
    pair: &SchemePair,
    j: &DensityFunction,
    rule: &QuadratureRule,
    base: &ControllerConfig,
    taus: &[f64],
    reference: QoiReference,
) -> Result<SweepResult> {
    if taus.len() < 2 {
        return Err(Error::Config(format!(
            "a sweep needs at least two tolerances, got {}",
            taus.len()
        )));
    }
    if taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Config("sweep tolerances must be positive and finite".into()));
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite by validation"));
    let j_reference = sweep_reference(problem, pair, j, rule, base, &sorted, reference)?;
    let rows = sorted
        .iter()
        .map(|&tau| sweep_row(problem, pair, j, rule, base, tau, j_reference))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { rows, j_reference })
}

/// Observed order of the QoI error against the tolerance. Rows whose error
/// sits at machine zero relative to the reference (below 100 eps |J_ref|)
/// are zeroed out so the fit drops and counts them; failed rows are skipped.
pub fn qoi_error_slope(result: &SweepResult) -> Result<OrderFit> {
    let floor = 100.0 * f64::EPSILON * result.j_reference.abs();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in &result.rows {
        if let Some(e) = row.err_qoi {
            xs.push(row.tau);
            ys.push(if e <= floor { 0.0 } else { e });
        }
    }
    fit_observed_order(&xs, &ys)
}

/// Location and prominence of the largest step within a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuspDiagnostic {
    /// Start time of the largest step in the window.
    pub t_star: f64,
    /// That step size over the median step size of the whole run.
    pub peak_ratio: f64,
}

/// Finds the largest step whose start time lies in `[t_lo, t_hi]` and sizes
/// it against the median step of the entire run. A step series that spikes
/// where the leading error density of the goal crosses zero shows up here as
/// a peak ratio well above one.
pub fn cusp_diagnostic(report: &RunReport, window: (f64, f64)) -> Result<CuspDiagnostic> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::Config(format!("empty diagnostic window [{lo}, {hi}]")));
    }
    if report.steps.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "step-series diagnostic needs at least 10 steps, got {}",
            report.steps.len()
        )));
    }
    let mut peak: Option<(f64, f64)> = None;
    for s in &report.steps {
        if s.t >= lo && s.t <= hi && peak.is_none_or(|(_, dt)| s.dt > dt) {
            peak = Some((s.t, s.dt));
        }
    }
    let (t_star, dt_star) =
        peak.ok_or_else(|| Error::Config(format!("no steps start inside [{lo}, {hi}]")))?;
    let mut dts: Vec<f64> = report.steps.iter().map(|s| s.dt).collect();
    dts.sort_by(|a, b| a.partial_cmp(b).expect("step sizes are finite"));
    let m = dts.len();
    let median = if m % 2 == 1 { dts[m / 2] } else { 0.5 * (dts[m / 2 - 1] + dts[m / 2]) };
    Ok(CuspDiagnostic { t_star, peak_ratio: dt_star / median })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::fixed_step_solve;
    use crate::problems::{toy_exact_qoi, toy_problem};
    use crate::qoi::toy_density;
    use crate::schemes::builtin_theta_pair;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn example_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 4.0])
    }

    #[test]
    fn seminorm_hand_values() {
        let w = WeightVector::new(vec![1.0, 0.0]).unwrap();
        let ones = WeightVector::new(vec![1.0, 1.0]).unwrap();
        let x = [1.0, 2.0];
        assert_eq!(seminorm(&x, &w).unwrap(), 1.0);
        assert_eq!(seminorm(&x, &ones).unwrap(), 3.0);
        assert_eq!(seminorm(&[0.0, 5.0], &w).unwrap(), 0.0);
    }

    #[test]
    fn lipschitz_hand_values_and_the_seminorm_counterexample() {
        let a = example_matrix();
        let w = WeightVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(lipschitz_seminorm(&a, &w).unwrap(), 2.0);
        assert_eq!(lipschitz_seminorm(&DMatrix::identity(2, 2), &w).unwrap(), 1.0);

        let x = [1.0, 2.0];
        let ax = [a[(0, 0)] * x[0] + a[(0, 1)] * x[1], a[(1, 0)] * x[0] + a[(1, 1)] * x[1]];
        let lhs = seminorm(&ax, &w).unwrap();
        assert_eq!(lhs, 4.0);
        // Bounded through the 1-norm of x, but NOT through its seminorm.
        let ones = WeightVector::new(vec![1.0, 1.0]).unwrap();
        assert!(lhs <= lipschitz_seminorm(&a, &w).unwrap() * seminorm(&x, &ones).unwrap());
        assert!(lhs > lipschitz_seminorm(&a, &w).unwrap() * seminorm(&x, &w).unwrap());
    }

    #[test]
    fn seminorm_is_homogeneous_and_subadditive() {
        let mut rng = StdRng::seed_from_u64(91);
        for _ in 0..500 {
            let d = rng.gen_range(1..6);
            let w = WeightVector::new(
                (0..d).map(|i| if i == 0 { 1.0 } else { rng.gen_range(0.0..2.0) }).collect(),
            )
            .unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let c: f64 = rng.gen_range(-2.0..2.0);
            let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
            let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let sx = seminorm(&x, &w).unwrap();
            let sy = seminorm(&y, &w).unwrap();
            assert!((seminorm(&cx, &w).unwrap() - c.abs() * sx).abs() < 1e-12);
            assert!(seminorm(&xy, &w).unwrap() <= sx + sy + 1e-12);
        }
    }

    #[test]
    fn all_ones_weights_give_the_induced_one_norm() {
        let mut rng = StdRng::seed_from_u64(92);
        for _ in 0..200 {
            let d = rng.gen_range(1..6);
            let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-5.0..5.0));
            let w = WeightVector::new(vec![1.0; d]).unwrap();
            // Independent evaluation: the induced 1-norm is attained at a
            // basis vector, so probe each one through a raw matvec.
            let induced = (0..d)
                .map(|jcol| {
                    let e: Vec<f64> = (0..d).map(|r| f64::from(r == jcol)).collect();
                    (0..d)
                        .map(|r| (0..d).map(|c| a[(r, c)] * e[c]).sum::<f64>().abs())
                        .sum::<f64>()
                })
                .fold(0.0f64, f64::max);
            let lip = lipschitz_seminorm(&a, &w).unwrap();
            assert!((lip - induced).abs() <= 1e-14 * (1.0 + induced));
        }
    }

    #[test]
    fn consistency_inequality_against_the_one_norm_on_random_probes() {
        let mut rng = StdRng::seed_from_u64(93);
        for _ in 0..1000 {
            let d = rng.gen_range(1..5);
            let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-2.0..2.0));
            let w = WeightVector::new(
                (0..d).map(|i| if i == 0 { 0.5 } else { rng.gen_range(0.0..1.5) }).collect(),
            )
            .unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let mut ax = vec![0.0; d];
            for r in 0..d {
                ax[r] = (0..d).map(|c| a[(r, c)] * x[c]).sum();
            }
            let norm1: f64 = x.iter().map(|v| v.abs()).sum();
            let lhs = seminorm(&ax, &w).unwrap();
            let rhs = lipschitz_seminorm(&a, &w).unwrap() * norm1;
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn fit_recovers_exact_power_laws() {
        let xs = [1e-2, 1e-3, 1e-4, 1e-5];
        let quad: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let fit = fit_observed_order(&xs, &quad).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert_eq!(fit.used, 4);
        assert_eq!(fit.dropped, 0);

        let lin: Vec<f64> = xs.iter().map(|x| 7.3 * x).collect();
        let fit = fit_observed_order(&xs, &lin).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);

        // Scaling ys moves the intercept, never the slope.
        let scaled: Vec<f64> = quad.iter().map(|y| 1e6 * y).collect();
        let f2 = fit_observed_order(&xs, &scaled).unwrap();
        assert!((f2.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_drops_zero_errors_and_refuses_thin_data() {
        let xs = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
        let ys = [1e-1, 1e-2, 0.0, 1e-4, f64::NAN];
        let fit = fit_observed_order(&xs, &ys).unwrap();
        assert_eq!(fit.used, 3);
        assert_eq!(fit.dropped, 2);
        assert!((fit.slope - 1.0).abs() < 1e-12);

        assert!(matches!(
            fit_observed_order(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_observed_order(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 1.0, 2.0]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_observed_order(&[1.0, -2.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sweep_keeps_duplicate_tolerances_and_is_deterministic() {
        let p = toy_problem(-1.0).unwrap();
        let pair = builtin_theta_pair();
        let j = toy_density("u2").unwrap();
        let base = ControllerConfig::for_pair(1e-4, &pair, EstimatorVariant::Goal).unwrap();
        let exact = toy_exact_qoi(-1.0, "u2", 0.0, 2.0).unwrap();
        let taus = [1e-4, 1e-5, 1e-4];
        let s = sweep(
            &p,
            &pair,
            &j,
            &QuadratureRule::Trapezoid,
            &base,
            &taus,
            QoiReference::Exact(exact),
        )
        .unwrap();
        assert_eq!(s.rows.len(), 3);
        assert_eq!(s.rows[0].tau, 1e-4);
        assert_eq!(s.rows[1].tau, 1e-4);
        assert_eq!(s.rows[2].tau, 1e-5);
        assert_eq!(s.rows[0].n_steps, s.rows[1].n_steps);
        assert_eq!(s.rows[0].j_h.to_bits(), s.rows[1].j_h.to_bits());
        for row in &s.rows {
            assert!(row.err_qoi.unwrap() >= 0.0);
            assert!(row.failure.is_none());
        }
    }

    #[test]
    fn tighter_tolerance_never_coarsens_the_classic_run() {
        let p = toy_problem(-1.0).unwrap();
        let pair = builtin_theta_pair();
        let j = toy_density("u2").unwrap();
        let base = ControllerConfig::for_pair(1e-3, &pair, EstimatorVariant::Classic).unwrap();
        let taus = [1e-3, 5e-4, 2.5e-4, 1.25e-4, 6.25e-5];
        let exact = toy_exact_qoi(-1.0, "u2", 0.0, 2.0).unwrap();
        let s = sweep(
            &p,
            &pair,
            &j,
            &QuadratureRule::Trapezoid,
            &base,
            &taus,
            QoiReference::Exact(exact),
        )
        .unwrap();
        for w in s.rows.windows(2) {
            assert!(w[1].n_steps >= w[0].n_steps);
        }
    }

    #[test]
    fn adaptive_reference_comes_from_a_tighter_classic_run() {
        let p = toy_problem(-1.0).unwrap();
        let pair = builtin_theta_pair();
        let j = toy_density("u2").unwrap();
        let base = ControllerConfig::for_pair(1e-3, &pair, EstimatorVariant::Goal).unwrap();
        let taus = [1e-3, 1e-4];
        let s = sweep(
            &p,
            &pair,
            &j,
            &QuadratureRule::Trapezoid,
            &base,
            &taus,
            QoiReference::ClassicAdaptive,
        )
        .unwrap();
        let exact = toy_exact_qoi(-1.0, "u2", 0.0, 2.0).unwrap();
        // Reference run at tau = 1e-5 sits well inside the coarse rows' error.
        assert!((s.j_reference - exact).abs() < 1e-4);
        assert!(s.rows[0].err_qoi.unwrap() > (s.j_reference - exact).abs());
    }

    #[test]
    fn goal_variant_meets_the_error_target_with_fewer_steps_when_stiffness_hides() {
        // Fast decaying second component outside the density's support: the
        // classic estimator resolves the transient, the goal one skips it.
        let p = toy_problem(-100.0).unwrap();
        let pair = builtin_theta_pair();
        let j = toy_density("u1").unwrap();
        let exact = toy_exact_qoi(-100.0, "u1", 0.0, 2.0).unwrap();
        let taus = [1e-5, 1e-6, 1e-7, 1e-8];
        let run = |variant| {
            let base = ControllerConfig::for_pair(1e-5, &pair, variant).unwrap();
            sweep(
                &p,
                &pair,
                &j,
                &QuadratureRule::Trapezoid,
                &base,
                &taus,
                QoiReference::Exact(exact),
            )
            .unwrap()
        };
        let goal = run(EstimatorVariant::Goal);
        let classic = run(EstimatorVariant::Classic);
        let first_hit = |s: &SweepResult| {
            s.rows
                .iter()
                .find(|r| r.err_qoi.is_some_and(|e| e <= 1e-6))
                .map(|r| r.n_steps)
                .expect("some row reaches the error target")
        };
        let n_goal = first_hit(&goal);
        let n_classic = first_hit(&classic);
        assert!(n_goal < n_classic);
        assert!(n_classic as f64 >= 1.2 * n_goal as f64);
    }

    #[test]
    fn qoi_error_slope_matches_hand_fit_and_floors_machine_zero_rows() {
        let rows = vec![
            SweepRow {
                tau: 1e-2,
                n_steps: 10,
                j_h: 1.0,
                err_qoi: Some(1e-2),
                err_solution_te: None,
                wall_ms: 0.0,
                failure: None,
            },
            SweepRow {
                tau: 1e-3,
                n_steps: 31,
                j_h: 1.0,
                err_qoi: Some(1e-3),
                err_solution_te: None,
                wall_ms: 0.0,
                failure: None,
            },
            SweepRow {
                tau: 1e-4,
                n_steps: 100,
                j_h: 1.0,
                err_qoi: Some(1e-4),
                err_solution_te: None,
                wall_ms: 0.0,
                failure: None,
            },
            SweepRow {
                tau: 1e-5,
                n_steps: 310,
                j_h: 1.0,
                err_qoi: Some(1e-15),
                err_solution_te: None,
                wall_ms: 0.0,
                failure: None,
            },
        ];
        let s = SweepResult { rows, j_reference: 1.0 };
        let fit = qoi_error_slope(&s).unwrap();
        // The 1e-15 row sits below 100 eps |J| and must not drag the slope.
        assert_eq!(fit.used, 3);
        assert_eq!(fit.dropped, 1);
        assert!((fit.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_steps_have_unit_peak_ratio() {
        let p = toy_problem(-1.0).unwrap();
        let pair = builtin_theta_pair();
        let j = toy_density("u1").unwrap();
        let r = fixed_step_solve(&p, &pair, &j, &QuadratureRule::Trapezoid, 32).unwrap();
        let d = cusp_diagnostic(&r, (0.0, 2.0)).unwrap();
        assert!((d.peak_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decreasing_steps_peak_at_the_first_window_entry() {
        let p = toy_problem(-1.0).unwrap();
        let pair = builtin_theta_pair();
        let j = toy_density("u1").unwrap();
        let mut r = fixed_step_solve(&p, &pair, &j, &QuadratureRule::Trapezoid, 16).unwrap();
        for (i, s) in r.steps.iter_mut().enumerate() {
            s.dt = 1.0 / (i + 1) as f64;
        }
        let d = cusp_diagnostic(&r, (0.0, 2.0)).unwrap();
        assert_eq!(d.t_star, r.steps[0].t);
    }

    #[test]
    fn degenerate_diagnostic_inputs_are_rejected() {
        let p = toy_problem(-1.0).unwrap();
        let pair = builtin_theta_pair();
        let j = toy_density("u1").unwrap();
        let r = fixed_step_solve(&p, &pair, &j, &QuadratureRule::Trapezoid, 16).unwrap();
        assert!(matches!(cusp_diagnostic(&r, (1.5, 0.5)), Err(Error::Config(_))));
        assert!(matches!(cusp_diagnostic(&r, (5.0, 6.0)), Err(Error::Config(_))));
        let short = fixed_step_solve(&p, &pair, &j, &QuadratureRule::Trapezoid, 4).unwrap();
        assert!(matches!(
            cusp_diagnostic(&short, (0.0, 2.0)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn weight_vector_rejects_degenerate_inputs() {
        assert!(WeightVector::new(vec![]).is_err());
        assert!(WeightVector::new(vec![0.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![1.0, -0.5]).is_err());
        assert!(WeightVector::new(vec![f64::NAN]).is_err());
        assert!(WeightVector::new(vec![0.0, 2.0]).is_ok());
    }

    #[test]
    fn dimension_mismatches_are_reported() {
        let w = WeightVector::new(vec![1.0, 2.0]).unwrap();
        assert!(seminorm(&[1.0], &w).is_err());
        assert!(lipschitz_seminorm(&DMatrix::identity(3, 3), &w).is_err());
    }
}
