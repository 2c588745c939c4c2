//! Dual-weighted-residual error estimation in time for linear systems with a
//! linear density: Crank-Nicolson forward and adjoint solves on a shared time
//! grid, a per-cell residual estimate weighted by the adjoint refinement gap,
//! and a fixed-rate bisection loop driving the total estimate below a
//! tolerance.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrators::theta_step_linear;
use crate::problems::{IvpProblem, LinearRhs};

/// Partition of the integration window into cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Config("a time grid needs at least two nodes".into()));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("time grid nodes must be finite".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("time grid nodes must strictly increase".into()));
        }
        Ok(TimeGrid { nodes })
    }

    pub fn uniform(t0: f64, te: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::Config("a uniform grid needs at least one cell".into()));
        }
        if !(t0.is_finite() && te.is_finite() && te > t0) {
            return Err(Error::Config(format!("bad grid window [{t0}, {te}]")));
        }
        let nodes = (0..=cells)
            .map(|i| if i == cells { te } else { t0 + (te - t0) * i as f64 / cells as f64 })
            .collect();
        TimeGrid::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Endpoints of cell `n`.
    pub fn cell(&self, n: usize) -> (f64, f64) {
        (self.nodes[n], self.nodes[n + 1])
    }

    /// Every cell split at its midpoint.
    pub fn bisect_all(&self) -> TimeGrid {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(*self.nodes.last().expect("grids hold at least two nodes"));
        TimeGrid { nodes }
    }

    /// True when this grid contains every node of `coarser` (bitwise), i.e.
    /// it arose from `coarser` by splitting cells only.
    pub fn is_refinement_of(&self, coarser: &TimeGrid) -> bool {
        let mut it = self.nodes.iter();
        coarser.nodes.iter().all(|t| it.any(|s| s == t))
    }

    fn check_spans(&self, problem: &IvpProblem) -> Result<()> {
        let first = self.nodes[0];
        let last = *self.nodes.last().expect("grids hold at least two nodes");
        if (first - problem.t0).abs() > 1e-12 || (last - problem.te).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "grid [{first}, {last}] does not span the window [{}, {}] of {}",
                problem.t0, problem.te, problem.label
            )));
        }
        Ok(())
    }
}

/// Settings of the refinement loop.
#[derive(Debug, Clone, PartialEq)]
pub struct DwrConfig {
    /// Fraction of cells bisected per iteration.
    pub refine_fraction: f64,
    pub initial_cells: usize,
    /// Subdivision factor of the refined-adjoint grid; only 2 is supported.
    pub fine_factor: usize,
    /// Target for the total estimate.
    pub tau: f64,
    pub max_iterations: usize,
}

impl DwrConfig {
    pub fn new(tau: f64) -> Result<Self> {
        let cfg = DwrConfig {
            refine_fraction: 0.8,
            initial_cells: 10,
            fine_factor: 2,
            tau,
            max_iterations: 40,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.refine_fraction > 0.0 && self.refine_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "refine fraction must lie in (0, 1], got {}",
                self.refine_fraction
            )));
        }
        if self.initial_cells == 0 {
            return Err(Error::Config("need at least one initial cell".into()));
        }
        if self.fine_factor != 2 {
            return Err(Error::Unsupported(format!(
                "only bisection of the refined-adjoint grid is supported, got factor {}",
                self.fine_factor
            )));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tau)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("need at least one iteration".into()));
        }
        Ok(())
    }
}

fn require_linear<'a>(problem: &'a IvpProblem, what: &str) -> Result<&'a LinearRhs> {
    problem.linear_rhs().ok_or_else(|| {
        Error::Unsupported(format!(
            "{what} needs a problem in linear form, but {} is not",
            problem.label
        ))
    })
}

fn check_weights(problem: &IvpProblem, w: &[f64]) -> Result<()> {
    if w.len() != problem.dim {
        return Err(Error::Config(format!(
            "density has {} weights but the problem dimension is {}",
            w.len(),
            problem.dim
        )));
    }
    Ok(())
}

/// Crank-Nicolson march over the grid; returns the state at every node.
pub fn dwr_forward(problem: &IvpProblem, grid: &TimeGrid) -> Result<Vec<Vec<f64>>> {
    let lin = require_linear(problem, "the forward solve")?;
    grid.check_spans(problem)?;
    let mut states = Vec::with_capacity(grid.nodes.len());
    states.push(problem.u0.clone());
    for n in 0..grid.cells() {
        let (a, b) = grid.cell(n);
        let next = theta_step_linear(lin, a, states.last().expect("pushed above"), b - a, 0.5)?;
        states.push(next);
    }
    Ok(states)
}

/// Adjoint solve `-z' = A^T z + w`, `z(te) = 0`, marched backwards with
/// Crank-Nicolson on the same grid; returns the adjoint at every node.
pub fn dwr_adjoint(problem: &IvpProblem, w: &[f64], grid: &TimeGrid) -> Result<Vec<Vec<f64>>> {
    let lin = require_linear(problem, "the adjoint solve")?;
    grid.check_spans(problem)?;
    check_weights(problem, w)?;
    let wv = w.to_vec();
    let reversed = LinearRhs {
        matrix: lin.matrix.transpose(),
        forcing: Some(Arc::new(move |_t, out: &mut [f64]| out.copy_from_slice(&wv))),
    };
    let m = grid.cells();
    let mut states = vec![Vec::new(); m + 1];
    states[m] = vec![0.0; problem.dim];
    for n in (0..m).rev() {
        let (a, b) = grid.cell(n);
        // In the reversed time variable the adjoint is the plain IVP
        // zeta' = A^T zeta + w, so one Crank-Nicolson step per cell applies.
        states[n] = theta_step_linear(&reversed, a, &states[n + 1], b - a, 0.5)?;
    }
    Ok(states)
}

fn eval_forcing(lin: &LinearRhs, t: f64, buf: &mut [f64]) {
    match &lin.forcing {
        Some(g) => g(t, buf),
        None => buf.fill(0.0),
    }
}

/// Residual-weighted error estimate. Per cell, the residual of the nodal
/// linear interpolant (its slope minus `A u_h + g`) is weighted componentwise
/// by the gap between the refined adjoint `z_plus` and the coarse adjoint's
/// cell mean, then integrated with the trapezoid rule on the two half cells;
/// the cell value is the absolute result and `eta` their sum.
///
/// The coarse adjoint enters through its cell mean rather than its pointwise
/// interpolant: the forward scheme leaves no residual against cell constants
/// (for exactly integrated forcing), so subtracting the interpolant instead
/// would cancel the leading error term cell by cell and the estimate would
/// collapse two orders below the true error.
pub fn dwr_estimate(
    problem: &IvpProblem,
    u_h: &[Vec<f64>],
    z_h: &[Vec<f64>],
    z_plus: &[Vec<f64>],
    grid: &TimeGrid,
) -> Result<(f64, Vec<f64>)> {
    let lin = require_linear(problem, "the residual estimate")?;
    grid.check_spans(problem)?;
    let m = grid.cells();
    if u_h.len() != m + 1 || z_h.len() != m + 1 {
        return Err(Error::Config(format!(
            "nodal data ({} states, {} adjoints) does not match a grid of {} cells",
            u_h.len(),
            z_h.len(),
            m
        )));
    }
    if z_plus.len() != 2 * m + 1 {
        return Err(Error::Config(format!(
            "refined adjoint has {} nodes, expected {} from bisecting {} cells",
            z_plus.len(),
            2 * m + 1,
            m
        )));
    }
    let dim = problem.dim;
    let mut slope = vec![0.0; dim];
    let mut u_mid = vec![0.0; dim];
    let mut au = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut cell_etas = Vec::with_capacity(m);
    let mut eta = 0.0;

    for n in 0..m {
        let (a, b) = grid.cell(n);
        let dt = b - a;
        for i in 0..dim {
            slope[i] = (u_h[n + 1][i] - u_h[n][i]) / dt;
            u_mid[i] = 0.5 * (u_h[n][i] + u_h[n + 1][i]);
        }

        let z_mean: Vec<f64> = (0..dim)
            .map(|i| 0.5 * (z_h[n][i] + z_h[n + 1][i]))
            .collect();

        // Weighted residual sum over components at one sample time.
        let sample = |t: f64, u_val: &[f64], z_fine: &[f64], au: &mut [f64], g: &mut [f64]| {
            lin.matrix.matvec(u_val, au);
            eval_forcing(lin, t, g);
            (0..dim)
                .map(|i| (slope[i] - au[i] - g[i]) * (z_fine[i] - z_mean[i]))
                .sum::<f64>()
        };

        let r0 = sample(a, &u_h[n], &z_plus[2 * n], &mut au, &mut g);
        let rm = sample(0.5 * (a + b), &u_mid, &z_plus[2 * n + 1], &mut au, &mut g);
        let r1 = sample(b, &u_h[n + 1], &z_plus[2 * n + 2], &mut au, &mut g);

        let cell = 0.25 * dt * (r0 + 2.0 * rm + r1).abs();
        cell_etas.push(cell);
        eta += cell;
    }
    Ok((eta, cell_etas))
}

/// Bisects the `ceil(x * cells)` cells with the largest estimates, ties
/// broken toward earlier cells.
pub fn dwr_refine(grid: &TimeGrid, cell_etas: &[f64], x: f64) -> Result<TimeGrid> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::Config(format!("refine fraction must lie in (0, 1], got {x}")));
    }
    let m = grid.cells();
    if cell_etas.len() != m {
        return Err(Error::Config(format!(
            "{} cell estimates do not match a grid of {} cells",
            cell_etas.len(),
            m
        )));
    }
    if cell_etas.iter().any(|e| !e.is_finite()) {
        return Err(Error::Config("cell estimates must be finite".into()));
    }
    // Epsilon guard so an exact product like 0.8 * 10 never rounds up.
    let k = (((x * m as f64) - 1e-9).ceil().max(1.0) as usize).min(m);
    let mut order: Vec<usize> = (0..m).collect();
    // Stable sort: equal estimates keep index order, so earlier cells win.
    order.sort_by(|&a, &b| cell_etas[b].partial_cmp(&cell_etas[a]).expect("checked finite"));
    let mut bisect = vec![false; m];
    for &i in order.iter().take(k) {
        bisect[i] = true;
    }
    let mut nodes = Vec::with_capacity(m + k + 1);
    for n in 0..m {
        let (a, b) = grid.cell(n);
        nodes.push(a);
        if bisect[n] {
            nodes.push(0.5 * (a + b));
        }
    }
    nodes.push(grid.nodes[m]);
    TimeGrid::new(nodes)
}

/// Trapezoid value of `J = int w^T u dt` from nodal states.
pub fn trapezoid_qoi(w: &[f64], grid: &TimeGrid, states: &[Vec<f64>]) -> f64 {
    let dot = |u: &[f64]| w.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
    let mut j = 0.0;
    for n in 0..grid.cells() {
        let (a, b) = grid.cell(n);
        j += 0.5 * (b - a) * (dot(&states[n]) + dot(&states[n + 1]));
    }
    j
}

/// One row of the refinement trace.
#[derive(Debug, Clone, Copy)]
pub struct DwrIteration {
    pub iteration: usize,
    pub cells: usize,
    pub eta: f64,
    pub j_h: f64,
    /// `|J_ref - J_h|` when a reference value was supplied.
    pub err_qoi: Option<f64>,
}

/// Result of the refinement loop. `converged` is false when the iteration
/// budget ran out before the estimate met the tolerance; the trace and the
/// last grid are kept either way.
#[derive(Debug, Clone)]
pub struct DwrOutcome {
    pub converged: bool,
    pub grid: TimeGrid,
    pub eta: f64,
    pub forward: Vec<Vec<f64>>,
    pub j_h: f64,
    pub trace: Vec<DwrIteration>,
}

/// Forward solve, adjoint solves on the grid and its bisection, residual
/// estimate, fixed-rate refinement; repeats until `eta <= tau` or the
/// iteration budget is spent.
pub fn dwr_loop(
    problem: &IvpProblem,
    w: &[f64],
    cfg: &DwrConfig,
    j_reference: Option<f64>,
) -> Result<DwrOutcome> {
    cfg.validate()?;
    require_linear(problem, "the refinement loop")?;
    check_weights(problem, w)?;
    let mut grid = TimeGrid::uniform(problem.t0, problem.te, cfg.initial_cells)?;
    let mut trace = Vec::new();

    for iteration in 0..cfg.max_iterations {
        let forward = dwr_forward(problem, &grid)?;
        let z_h = dwr_adjoint(problem, w, &grid)?;
        let z_plus = dwr_adjoint(problem, w, &grid.bisect_all())?;
        let (eta, cell_etas) = dwr_estimate(problem, &forward, &z_h, &z_plus, &grid)?;
        let j_h = trapezoid_qoi(w, &grid, &forward);
        trace.push(DwrIteration {
            iteration,
            cells: grid.cells(),
            eta,
            j_h,
            err_qoi: j_reference.map(|r| (r - j_h).abs()),
        });
        if eta <= cfg.tau {
            return Ok(DwrOutcome { converged: true, grid, eta, forward, j_h, trace });
        }
        if iteration + 1 == cfg.max_iterations {
            return Ok(DwrOutcome { converged: false, grid, eta, forward, j_h, trace });
        }
        grid = dwr_refine(&grid, &cell_etas, cfg.refine_fraction)?;
    }
    unreachable!("the loop returns on its final iteration")
}
