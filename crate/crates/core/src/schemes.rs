//! Embedded scheme pairs and the order-condition checker.
//!
//! A pair couples a main method of order `p` with a lower-order companion of
//! order `p_hat` that reuses the same stage data, so the difference of the two
//! solutions is a free estimate of the companion's local error. Two built-in
//! pairs cover the experiments in this crate: the classical four-stage
//! explicit scheme with an embedded third-order companion and a midpoint
//! interpolant, and the implicit theta method with `theta = 1/2` as the main
//! scheme and `theta = 1` as the companion.
//!
//! Order conditions are checked in gamma-scaled form: a weight vector `b`
//! aiming at the partial step `t + gamma * dt` must satisfy the usual
//! conditions with the right-hand sides multiplied by `gamma^k`. `gamma = 1`
//! recovers the plain conditions.

use crate::error::{Error, Result};

/// Residual threshold below which an order condition counts as satisfied.
pub const ORDER_CONDITION_TOL: f64 = 1e-13;

/// Coefficients of an explicit Runge-Kutta scheme.
#[derive(Debug, Clone)]
pub struct ButcherTableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Classical order of the `b` weights, checked at construction.
    pub order: u32,
}

impl ButcherTableau {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>, order: u32) -> Result<Self> {
        let s = b.len();
        if s == 0 || a.len() != s || c.len() != s {
            return Err(Error::Config("tableau dimensions do not match".into()));
        }
        for (i, row) in a.iter().enumerate() {
            if row.len() != s {
                return Err(Error::Config("tableau A must be square".into()));
            }
            for (j, v) in row.iter().enumerate() {
                if j >= i && *v != 0.0 {
                    return Err(Error::Config(
                        "tableau A must be strictly lower triangular (explicit scheme)".into(),
                    ));
                }
            }
            let row_sum: f64 = row.iter().sum();
            if (row_sum - c[i]).abs() > 1e-14 {
                return Err(Error::Config(format!(
                    "stage abscissa c[{i}] = {} does not match row sum {row_sum}",
                    c[i]
                )));
            }
        }
        if c[0] != 0.0 {
            return Err(Error::Config("first stage abscissa must be zero".into()));
        }
        if (b.iter().sum::<f64>() - 1.0).abs() > 1e-14 {
            return Err(Error::Config("main weights must sum to one".into()));
        }
        let tableau = ButcherTableau { a, b, c, order };
        let report = verify_order_conditions(&tableau.b.clone(), &tableau, 1.0, order)?;
        if !report.passed() {
            return Err(Error::Config(format!(
                "main weights fail an order-{order} condition: {}",
                report.failure_summary()
            )));
        }
        Ok(tableau)
    }

    pub fn stage_count(&self) -> usize {
        self.b.len()
    }
}

/// Companion weights sharing the tableau's stages.
///
/// `order` is the order the step controller assumes for the companion
/// solution on the problems it is paired with; `verified_order` reports the
/// order certified by the general (non-autonomous) conditions, which may be
/// one lower.
#[derive(Debug, Clone)]
pub struct EmbeddedWeights {
    pub b_hat: Vec<f64>,
    pub order: u32,
}

impl EmbeddedWeights {
    pub fn new(b_hat: Vec<f64>, order: u32, tableau: &ButcherTableau) -> Result<Self> {
        if b_hat.len() != tableau.stage_count() {
            return Err(Error::Config("embedded weight count must match stages".into()));
        }
        if (b_hat.iter().sum::<f64>() - 1.0).abs() > 1e-14 {
            return Err(Error::Config("embedded weights must sum to one".into()));
        }
        if order >= tableau.order {
            return Err(Error::Config(
                "embedded order must be below the main order".into(),
            ));
        }
        Ok(EmbeddedWeights { b_hat, order })
    }
}

/// Weights producing an approximation at the partial step `t + gamma * dt`
/// from the same stage derivatives.
#[derive(Debug, Clone)]
pub struct DenseWeights {
    pub gamma: f64,
    pub b_star: Vec<f64>,
    pub order: u32,
}

impl DenseWeights {
    pub fn new(gamma: f64, b_star: Vec<f64>, order: u32, tableau: &ButcherTableau) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config("dense-output gamma must lie in (0, 1]".into()));
        }
        if b_star.len() != tableau.stage_count() {
            return Err(Error::Config("dense weight count must match stages".into()));
        }
        let report = verify_order_conditions(&b_star, tableau, gamma, order)?;
        if !report.passed() {
            return Err(Error::Config(format!(
                "dense weights fail a scaled order-{order} condition: {}",
                report.failure_summary()
            )));
        }
        Ok(DenseWeights { gamma, b_star, order })
    }
}

/// One checked order condition: `actual` should equal `target` for the
/// condition to hold at this order.
#[derive(Debug, Clone)]
pub struct ConditionCheck {
    pub order: u32,
    pub label: &'static str,
    pub actual: f64,
    pub target: f64,
}

impl ConditionCheck {
    pub fn residual(&self) -> f64 {
        (self.actual - self.target).abs()
    }

    pub fn passed(&self) -> bool {
        self.residual() <= ORDER_CONDITION_TOL
    }
}

/// Per-condition result of an order-condition check.
#[derive(Debug, Clone)]
pub struct OrderConditionReport {
    pub gamma: f64,
    pub up_to_order: u32,
    pub conditions: Vec<ConditionCheck>,
}

impl OrderConditionReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(ConditionCheck::passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.conditions
            .iter()
            .map(ConditionCheck::residual)
            .fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.conditions.iter().filter(|c| !c.passed())
    }

    pub fn failure_summary(&self) -> String {
        self.failures()
            .map(|c| format!("{} = {} (want {})", c.label, c.actual, c.target))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Checks the gamma-scaled order conditions for `weights` against `tableau`
/// through `up_to_order`. Conditions are hard-coded through order 4.
pub fn verify_order_conditions(
    weights: &[f64],
    tableau: &ButcherTableau,
    gamma: f64,
    up_to_order: u32,
) -> Result<OrderConditionReport> {
    if up_to_order == 0 || up_to_order > 4 {
        return Err(Error::Unsupported(format!(
            "order conditions are hard-coded through order 4, got {up_to_order}"
        )));
    }
    if weights.len() != tableau.stage_count() {
        return Err(Error::Config("weight count must match stages".into()));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Config("gamma must be positive and finite".into()));
    }

    let c = &tableau.c;
    let dot = |w: &[f64], v: &[f64]| -> f64 { w.iter().zip(v).map(|(a, b)| a * b).sum() };
    let amul = |v: &[f64]| -> Vec<f64> {
        tableau
            .a
            .iter()
            .map(|row| dot(row, v))
            .collect::<Vec<f64>>()
    };

    let c2: Vec<f64> = c.iter().map(|x| x * x).collect();
    let c3: Vec<f64> = c.iter().map(|x| x * x * x).collect();
    let ac = amul(c);
    let ac2 = amul(&c2);
    let aac = amul(&ac);
    let c_ac: Vec<f64> = c.iter().zip(&ac).map(|(x, y)| x * y).collect();

    let g2 = gamma * gamma;
    let g3 = g2 * gamma;
    let g4 = g3 * gamma;
    let all: [(u32, &'static str, f64, f64); 8] = [
        (1, "sum(b)", weights.iter().sum(), gamma),
        (2, "sum(b c)", dot(weights, c), g2 / 2.0),
        (3, "sum(b c^2)", dot(weights, &c2), g3 / 3.0),
        (3, "sum(b (A c))", dot(weights, &ac), g3 / 6.0),
        (4, "sum(b c^3)", dot(weights, &c3), g4 / 4.0),
        (4, "sum(b c (A c))", dot(weights, &c_ac), g4 / 8.0),
        (4, "sum(b (A c^2))", dot(weights, &ac2), g4 / 12.0),
        (4, "sum(b (A (A c)))", dot(weights, &aac), g4 / 24.0),
    ];
    let conditions = all
        .into_iter()
        .filter(|(ord, ..)| *ord <= up_to_order)
        .map(|(order, label, actual, target)| ConditionCheck { order, label, actual, target })
        .collect();
    Ok(OrderConditionReport { gamma, up_to_order, conditions })
}

/// Largest order `q <= 4` such that all conditions through `q` pass.
pub fn verified_order(weights: &[f64], tableau: &ButcherTableau, gamma: f64) -> Result<u32> {
    let report = verify_order_conditions(weights, tableau, gamma, 4)?;
    let mut q = 0;
    for ord in 1..=4 {
        let ok = report
            .conditions
            .iter()
            .filter(|c| c.order == ord)
            .all(ConditionCheck::passed);
        if ok {
            q = ord;
        } else {
            break;
        }
    }
    Ok(q)
}

/// An embedded pair: the main scheme and its lower-order companion, plus any
/// partial-step weight sets the stages support.
#[derive(Debug, Clone)]
pub enum SchemePair {
    ExplicitRk {
        tableau: ButcherTableau,
        embedded: EmbeddedWeights,
        dense: Vec<DenseWeights>,
    },
    /// Implicit theta pair for linear problems; `main` and `companion` are the
    /// two theta values. Partial-step values at `gamma = 1/2` come from
    /// endpoint interpolation.
    Theta { main: f64, companion: f64 },
}

impl SchemePair {
    pub fn id(&self) -> &'static str {
        match self {
            SchemePair::ExplicitRk { .. } => "rk4",
            SchemePair::Theta { .. } => "theta",
        }
    }

    fn theta_order(theta: f64) -> u32 {
        if (theta - 0.5).abs() < 1e-15 {
            2
        } else {
            1
        }
    }

    /// Order of the propagated (main) solution.
    pub fn order(&self) -> u32 {
        match self {
            SchemePair::ExplicitRk { tableau, .. } => tableau.order,
            SchemePair::Theta { main, .. } => Self::theta_order(*main),
        }
    }

    /// Order the controller assumes for the companion solution.
    pub fn embedded_order(&self) -> u32 {
        match self {
            SchemePair::ExplicitRk { embedded, .. } => embedded.order,
            SchemePair::Theta { companion, .. } => Self::theta_order(*companion),
        }
    }

    /// Order of the partial-step value at `gamma`, if one is available.
    pub fn dense_order_at(&self, gamma: f64) -> Option<u32> {
        match self {
            SchemePair::ExplicitRk { dense, .. } => dense
                .iter()
                .find(|d| (d.gamma - gamma).abs() < 1e-15)
                .map(|d| d.order),
            // Linear interpolation between the step endpoints.
            SchemePair::Theta { .. } => ((gamma - 0.5).abs() < 1e-15).then_some(2),
        }
    }
}

/// The classical four-stage scheme of order 4, an embedded companion
/// `b_hat = (1, 1, 0, 1) / 3`, and midpoint weights
/// `b_star = (5, 4, 4, -1) / 24` of scaled order 3 at `gamma = 1/2`.
///
/// The companion is stored with order 3: its general-case order is 2 (the
/// `sum(b c^2)` condition fails, see `verified_order`), but its one-step error
/// is fourth order on the autonomous problems this pair is used with, and the
/// controller relies on that exponent.
pub fn builtin_rk4_pair() -> SchemePair {
    let tableau = ButcherTableau::new(
        vec![
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ],
        vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        vec![0.0, 0.5, 0.5, 1.0],
        4,
    )
    .expect("built-in tableau is valid");
    let embedded = EmbeddedWeights {
        b_hat: vec![1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0],
        order: 3,
    };
    let dense = DenseWeights::new(
        0.5,
        vec![5.0 / 24.0, 4.0 / 24.0, 4.0 / 24.0, -1.0 / 24.0],
        3,
        &tableau,
    )
    .expect("built-in dense weights are valid");
    SchemePair::ExplicitRk { tableau, embedded, dense: vec![dense] }
}

/// Trapezoidal rule (`theta = 1/2`, order 2) as the main scheme with implicit
/// Euler (`theta = 1`, order 1) as the companion.
pub fn builtin_theta_pair() -> SchemePair {
    SchemePair::Theta { main: 0.5, companion: 1.0 }
}
