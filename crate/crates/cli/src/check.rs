//! Self-verification battery: order conditions for the built-in pairs,
//! worked seminorm examples, and exact-solution residuals. Prints one line
//! per check and exits nonzero if any fails.

use nalgebra::DMatrix;

use qoi_adapt::analysis::{lipschitz_seminorm, seminorm, WeightVector};
use qoi_adapt::problems::{toy_exact_qoi, toy_problem};
use qoi_adapt::qoi::toy_density;
use qoi_adapt::schemes::{builtin_rk4_pair, verify_order_conditions, SchemePair};
use qoi_adapt::Result;

struct Line {
    name: String,
    failure: Option<String>,
}

fn check(lines: &mut Vec<Line>, name: &str, failure: Option<String>) {
    lines.push(Line { name: name.into(), failure });
}

fn near(actual: f64, want: f64, tol: f64) -> Option<String> {
    if (actual - want).abs() <= tol {
        None
    } else {
        Some(format!("got {actual}, want {want}"))
    }
}

/// When `tamper` is set, one dense-output weight is perturbed first; the
/// battery must then fail and name the broken condition.
pub fn run(tamper: bool) -> Result<u8> {
    let mut pair = builtin_rk4_pair();
    if tamper {
        let SchemePair::ExplicitRk { dense, .. } = &mut pair else { unreachable!() };
        dense[0].b_star[0] += 1e-3;
    }
    let SchemePair::ExplicitRk { tableau, embedded, dense } = &pair else { unreachable!() };

    let mut lines = Vec::new();

    let full = verify_order_conditions(&tableau.b, tableau, 1.0, tableau.order)?;
    check(
        &mut lines,
        &format!("order conditions: rk4 main weights through order {}", tableau.order),
        (!full.passed()).then(|| full.failure_summary()),
    );
    // The companion's stored order feeds the controller exponent and is one
    // above its quadrature order; the conditions themselves hold through 2.
    let emb = verify_order_conditions(&embedded.b_hat, tableau, 1.0, embedded.order - 1)?;
    check(
        &mut lines,
        &format!("order conditions: rk4 companion weights through order {}", embedded.order - 1),
        (!emb.passed()).then(|| emb.failure_summary()),
    );
    for d in dense {
        let rep = verify_order_conditions(&d.b_star, tableau, d.gamma, d.order)?;
        check(
            &mut lines,
            &format!(
                "order conditions: rk4 partial-step weights at gamma = {} through order {}",
                d.gamma, d.order
            ),
            (!rep.passed()).then(|| rep.failure_summary()),
        );
    }

    // Worked example: A = [[2, 1], [0, 4]], w = (1, 0), x = (1, 2).
    let w = WeightVector::new(vec![1.0, 0.0])?;
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 4.0]);
    let x = [1.0, 2.0];
    let ax = [4.0, 8.0];
    check(&mut lines, "seminorm example: |x|_w = 1", near(seminorm(&x, &w)?, 1.0, 0.0));
    check(&mut lines, "seminorm example: |A|_w = 2", near(lipschitz_seminorm(&a, &w)?, 2.0, 0.0));
    check(&mut lines, "seminorm example: |Ax|_w = 4", near(seminorm(&ax, &w)?, 4.0, 0.0));
    let bound_holds = seminorm(&ax, &w)? <= lipschitz_seminorm(&a, &w)? * (x[0].abs() + x[1].abs());
    check(
        &mut lines,
        "seminorm example: |Ax|_w <= |A|_w |x|_1",
        (!bound_holds).then(|| "bound violated".into()),
    );
    // |Ax|_w = 4 > |A|_w |x|_w = 2: the seminorm is not submultiplicative on
    // its own, which is why the Lipschitz constant pairs with the full 1-norm.
    let not_submultiplicative = seminorm(&ax, &w)? > lipschitz_seminorm(&a, &w)? * seminorm(&x, &w)?;
    check(
        &mut lines,
        "seminorm counterexample: |Ax|_w > |A|_w |x|_w",
        (!not_submultiplicative).then(|| "counterexample did not trigger".into()),
    );

    for k in [-1.0, -100.0] {
        let problem = toy_problem(k)?;
        let residual = problem.max_exact_residual(200).expect("toy carries an exact solution");
        check(
            &mut lines,
            &format!("toy exact solution: scaled residual, k = {k}"),
            (residual > 1e-10).then(|| format!("residual {residual}")),
        );
    }

    // The closed-form value of the default quantity of interest against a
    // fine trapezoid sum over the exact solution; second-order in 2^12 cells
    // leaves plenty of room inside 1e-6.
    let problem = toy_problem(-1.0)?;
    let j = toy_density("u1")?;
    let closed = toy_exact_qoi(-1.0, "u1", problem.t0, problem.te)?;
    let n = 1 << 12;
    let h = (problem.te - problem.t0) / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let t = problem.t0 + i as f64 * h;
        let u = problem.exact_state(t).expect("toy carries an exact solution");
        let weight = if i == 0 || i == n { 0.5 } else { 1.0 };
        sum += weight * h * j.eval(t, &u);
    }
    check(
        &mut lines,
        "toy exact QoI: closed form vs fine trapezoid",
        near(sum, closed, 1e-6),
    );

    let width = lines.iter().map(|l| l.name.len()).max().unwrap_or(0);
    let mut failed = 0;
    for line in &lines {
        match &line.failure {
            None => println!("{:<width$}  ok", line.name),
            Some(detail) => {
                failed += 1;
                println!("{:<width$}  FAIL: {detail}", line.name);
            }
        }
    }
    if failed == 0 {
        println!("all {} checks passed", lines.len());
        Ok(0)
    } else {
        println!("{failed} of {} checks failed", lines.len());
        Ok(1)
    }
}
