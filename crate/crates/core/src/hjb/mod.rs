//! Backward solver for the principal's reformulated control problem over
//! the state `(w, y)`, where `w` is the agent's continuation value:
//!
//! ```text
//! phi_t + max_{p, a} { -(r_A(p) - h(a)) phi_w + f(t, y, a) phi_y + mu(t, a)
//!                      + r_P(t, y, p) + (theta(a) sigma)^2 / 2 phi_ww } = 0
//! phi(w, y, T) = -g^{-1}(w) + q(y)
//! ```
//!
//! The scheme is explicit and monotone under the CFL limits checked by
//! [`Grid::validate`]. Time-varying coefficients are sampled once per step
//! at the step midpoint.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Grid, DEFAULT_C_CFL};
use crate::model::{maximize, principal_candidate, Derivatives, ModelSpec, Optimum, ThetaTable};

pub(crate) mod scheme;

use scheme::{interpolate, interpolate_derivatives, locate, StepOperator};

/// Solved value function and feedback policy on a grid.
///
/// `phi` holds `n_t + 1` time slices; the policy holds one slice per time
/// step, the argmax used to advance from `t_{n+1}` back to `t_n`. Slices
/// are laid out `w`-major with `y` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    grid: Grid,
    theta: ThetaTable,
    controls: Vec<f64>,
    payments: Vec<f64>,
    phi: Vec<f64>,
    policy_u: Vec<u16>,
    policy_pi: Vec<u16>,
}

impl ValueField {
    /// Reassembles a field from raw arrays, checking their shapes.
    pub fn from_parts(
        grid: Grid,
        theta: ThetaTable,
        controls: Vec<f64>,
        payments: Vec<f64>,
        phi: Vec<f64>,
        policy_u: Vec<u16>,
        policy_pi: Vec<u16>,
    ) -> Result<Self> {
        grid.check_shape()?;
        let len = grid.slice_len();
        let shape_ok = phi.len() == (grid.n_t + 1) * len
            && policy_u.len() == grid.n_t * len
            && policy_pi.len() == grid.n_t * len
            && theta.values().len() == controls.len()
            && policy_u.iter().all(|&u| theta.get(u as usize).is_some())
            && policy_pi.iter().all(|&p| (p as usize) < payments.len());
        if !shape_ok {
            return Err(Error::InvalidGrid("value field arrays do not match the grid".into()));
        }
        Ok(Self {
            grid,
            theta,
            controls,
            payments,
            phi,
            policy_u,
            policy_pi,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn theta(&self) -> &ThetaTable {
        &self.theta
    }

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    pub fn payments(&self) -> &[f64] {
        &self.payments
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn policy_u_indices(&self) -> &[u16] {
        &self.policy_u
    }

    pub fn policy_pi_indices(&self) -> &[u16] {
        &self.policy_pi
    }

    /// Replaces the sensitivity table, keeping everything else.
    pub fn with_theta(mut self, theta: ThetaTable) -> Self {
        self.theta = theta;
        self
    }

    pub fn slice(&self, n: usize) -> &[f64] {
        let len = self.grid.slice_len();
        &self.phi[n * len..(n + 1) * len]
    }

    #[inline]
    pub fn phi_at(&self, n: usize, i: usize, j: usize) -> f64 {
        self.phi[(n * self.grid.n_w + i) * self.grid.n_y + j]
    }

    /// Stored `(control index, payment index)` at step `n`, node `(i, j)`.
    #[inline]
    pub fn policy_index(&self, n: usize, i: usize, j: usize) -> (usize, usize) {
        let k = (n * self.grid.n_w + i) * self.grid.n_y + j;
        (self.policy_u[k] as usize, self.policy_pi[k] as usize)
    }

    /// Stored `(u*, pi*)` at step `n`, node `(i, j)`.
    pub fn policy_node(&self, n: usize, i: usize, j: usize) -> (f64, f64) {
        let (u, p) = self.policy_index(n, i, j);
        (self.controls[u], self.payments[p])
    }

    /// Bilinear interpolation of `phi` on time slice `n`.
    pub fn value_at(&self, w: f64, y: f64, n: usize) -> Result<f64> {
        interpolate(self.slice(n), &self.grid, w, y).ok_or(Error::OutOfBounds {
            w,
            y,
            t: self.grid.t(n),
        })
    }

    /// `phi(b, y0, 0)`: the principal's value of the optimal contract.
    pub fn initial_value(&self, spec: &ModelSpec) -> Result<f64> {
        self.value_at(spec.participation(), spec.y0(), 0)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub c_cfl: f64,
    pub z_tol: f64,
    /// Overrides the sensitivity table computed from the model.
    pub theta: Option<ThetaTable>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            c_cfl: DEFAULT_C_CFL,
            z_tol: ThetaTable::DEFAULT_Z_TOL,
            theta: None,
        }
    }
}

/// Solves on `grid` with default options.
pub fn solve(spec: &ModelSpec, grid: &Grid) -> Result<ValueField> {
    solve_with(spec, grid, &SolveOptions::default())
}

pub fn solve_with(spec: &ModelSpec, grid: &Grid, opts: &SolveOptions) -> Result<ValueField> {
    let (theta, out) = run(spec, grid, opts, true)?;
    Ok(ValueField {
        grid: *grid,
        theta,
        controls: spec.controls().to_vec(),
        payments: spec.payments().to_vec(),
        phi: out.phi,
        policy_u: out.policy_u,
        policy_pi: out.policy_pi,
    })
}

/// `phi(b, y0, 0)` without keeping the full field in memory.
pub fn solve_initial_value(spec: &ModelSpec, grid: &Grid, opts: &SolveOptions) -> Result<f64> {
    let (_, out) = run(spec, grid, opts, false)?;
    interpolate(&out.phi, grid, spec.participation(), spec.y0()).ok_or(Error::OutOfBounds {
        w: spec.participation(),
        y: spec.y0(),
        t: 0.0,
    })
}

fn run(spec: &ModelSpec, grid: &Grid, opts: &SolveOptions, keep: bool) -> Result<(ThetaTable, scheme::SweepOutput)> {
    spec.validate()?;
    if spec.controls().len() > u16::MAX as usize || spec.payments().len() > u16::MAX as usize {
        return Err(Error::InvalidModel("control and payment sets are limited to 65535 entries".into()));
    }
    let theta = match &opts.theta {
        Some(t) => t.clone(),
        None => ThetaTable::compute(spec, opts.z_tol)?,
    };
    grid.validate(spec, &theta, opts.c_cfl)?;
    let terminal = terminal_slice(spec, grid);
    let op = PrincipalOperator::new(spec, grid, &theta);
    let out = scheme::sweep(grid, &terminal, &op, keep)?;
    Ok((theta, out))
}

/// `-g^{-1}(w) + q(y)` at every node.
pub fn terminal_slice(spec: &ModelSpec, grid: &Grid) -> Vec<f64> {
    let mut out = vec![0.0; grid.slice_len()];
    for i in 0..grid.n_w {
        let pay = spec.end_pay().inverse(grid.w(i));
        for j in 0..grid.n_y {
            out[i * grid.n_y + j] = -pay + spec.terminal_reward(grid.y(j));
        }
    }
    out
}

pub(crate) struct PrincipalOperator<'a> {
    spec: &'a ModelSpec,
    grid: &'a Grid,
    active: Vec<usize>,
    effort: Vec<f64>,
    half_var: Vec<f64>,
    pay_util: Vec<f64>,
}

pub(crate) struct PrincipalTables {
    drift: Vec<f64>,
    /// `f(t, y_j, a)` at `[j * n_u + a]`
    rhs: Vec<f64>,
    /// `r_P(t, y_j, p)` at `[j * n_p + p]`
    reward: Vec<f64>,
}

impl<'a> PrincipalOperator<'a> {
    pub(crate) fn new(spec: &'a ModelSpec, grid: &'a Grid, theta: &ThetaTable) -> Self {
        let sigma = spec.revenue_vol();
        Self {
            spec,
            grid,
            active: theta.active().collect(),
            effort: spec.controls().iter().map(|&a| spec.effort_cost(a)).collect(),
            half_var: (0..spec.controls().len())
                .map(|u| {
                    let s = theta.get(u).unwrap_or(0.0) * sigma;
                    0.5 * s * s
                })
                .collect(),
            pay_util: spec.payments().iter().map(|&p| spec.pay_utility(p)).collect(),
        }
    }

    fn tables_at(&self, t: f64, ys: impl Iterator<Item = f64>) -> PrincipalTables {
        let controls = self.spec.controls();
        let payments = self.spec.payments();
        let mut rhs = Vec::new();
        let mut reward = Vec::new();
        for y in ys {
            rhs.extend(controls.iter().map(|&a| self.spec.system_rhs(t, y, a)));
            reward.extend(payments.iter().map(|&p| self.spec.running_reward(t, y, p)));
        }
        PrincipalTables {
            drift: controls.iter().map(|&a| self.spec.revenue_drift(t, a)).collect(),
            rhs,
            reward,
        }
    }

    #[inline]
    fn optimize(&self, tables: &PrincipalTables, row: usize, d: &Derivatives) -> (f64, usize, usize) {
        let n_u = self.effort.len();
        let n_p = self.pay_util.len();
        maximize(&self.active, n_p, |u, p| {
            principal_candidate(
                self.effort[u],
                tables.rhs[row * n_u + u],
                tables.drift[u],
                self.half_var[u],
                self.pay_util[p],
                tables.reward[row * n_p + p],
            )
            .evaluate(d)
        })
    }
}

impl StepOperator for PrincipalOperator<'_> {
    type Tables = PrincipalTables;

    fn prepare(&self, n: usize) -> Result<PrincipalTables> {
        Ok(self.tables_at(self.grid.t_mid(n), (0..self.grid.n_y).map(|j| self.grid.y(j))))
    }

    #[inline]
    fn node(&self, tables: &PrincipalTables, _i: usize, j: usize, d: &Derivatives) -> (f64, u16, u16) {
        let (v, u, p) = self.optimize(tables, j, d);
        (v, u as u16, p as u16)
    }
}

/// Feedback `(u*, pi*)` at an arbitrary state and time.
///
/// Derivatives are bilinearly interpolated from the node differences of the
/// slice the enclosing step reads, and the Hamiltonian argmax is re-run at
/// the query point; at grid nodes this reproduces the stored policy.
pub fn policy_at(field: &ValueField, spec: &ModelSpec, w: f64, y: f64, t: f64) -> Result<Optimum> {
    PolicyLookup::new(field, spec).at(w, y, t)
}

/// Reusable feedback-map evaluator over one solved field.
pub struct PolicyLookup<'a> {
    field: &'a ValueField,
    spec: &'a ModelSpec,
    op: PrincipalOperator<'a>,
}

impl<'a> PolicyLookup<'a> {
    pub fn new(field: &'a ValueField, spec: &'a ModelSpec) -> Self {
        Self {
            field,
            spec,
            op: PrincipalOperator::new(spec, field.grid(), field.theta()),
        }
    }

    pub fn field(&self) -> &'a ValueField {
        self.field
    }

    pub fn spec(&self) -> &'a ModelSpec {
        self.spec
    }

    pub fn at(&self, w: f64, y: f64, t: f64) -> Result<Optimum> {
        let grid = self.field.grid();
        if !(t >= 0.0 && t <= grid.horizon) {
            return Err(Error::OutOfBounds { w, y, t });
        }
        self.at_step(w, y, grid.step_of(t))
    }

    /// Policy for solver step `n`, reading slice `n + 1`.
    pub fn at_step(&self, w: f64, y: f64, n: usize) -> Result<Optimum> {
        let grid = self.field.grid();
        let oob = || Error::OutOfBounds { w, y, t: grid.t(n) };
        let (j, sy) = locate(y, grid.y_min, grid.y_max, grid.n_y).ok_or_else(oob)?;
        let d = interpolate_derivatives(self.field.slice(n + 1), grid, w, y).ok_or_else(oob)?;
        let y_eval = if sy == 0.0 { grid.y(j) } else { y };
        let tables = self.op.tables_at(grid.t_mid(n), core::iter::once(y_eval));
        let (value, u_idx, pi_idx) = self.op.optimize(&tables, 0, &d);
        Ok(Optimum {
            value,
            u_idx,
            pi_idx,
            u_star: self.field.controls()[u_idx],
            pi_star: self.field.payments()[pi_idx],
        })
    }
}

/// `phi(b, y0, 0)` across a sequence of grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<(Grid, f64)>,
}

impl ConvergenceReport {
    /// `|v_{k+1} - v_k|` for successive grids.
    pub fn gaps(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect()
    }

    /// Whether successive gaps strictly shrink (or are all zero).
    pub fn is_shrinking(&self) -> bool {
        let g = self.gaps();
        g.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0))
    }

    /// Last successive gap: the residual discretization uncertainty.
    pub fn last_gap(&self) -> f64 {
        self.gaps().last().copied().unwrap_or(0.0)
    }

    pub fn finest_value(&self) -> Option<f64> {
        self.rows.last().map(|r| r.1)
    }
}

pub fn convergence_report(spec: &ModelSpec, grids: &[Grid]) -> Result<ConvergenceReport> {
    convergence_report_with(spec, grids, &SolveOptions::default())
}

pub fn convergence_report_with(spec: &ModelSpec, grids: &[Grid], opts: &SolveOptions) -> Result<ConvergenceReport> {
    let mut rows = Vec::with_capacity(grids.len());
    for g in grids {
        rows.push((*g, solve_initial_value(spec, g, opts)?));
    }
    Ok(ConvergenceReport { rows })
}

/// `count` successive refinements of `base`, each halving `dw` and `dy`,
/// with at least twice the time steps and as many more as the CFL limits
/// require. The returned list starts with `base`.
pub fn dyadic_refinements(spec: &ModelSpec, base: &Grid, count: usize, c_cfl: f64) -> Result<Vec<Grid>> {
    let theta = ThetaTable::compute(spec, ThetaTable::DEFAULT_Z_TOL)?;
    let mut out = vec![*base];
    let mut g = *base;
    for _ in 0..count {
        g.n_w = 2 * (g.n_w - 1) + 1;
        g.n_y = 2 * (g.n_y - 1) + 1;
        g.n_t *= 2;
        loop {
            match g.validate(spec, &theta, c_cfl) {
                Ok(_) => break,
                Err(Error::CflViolation { .. }) => g.n_t = g.n_t + g.n_t / 8 + 1,
                Err(e) => return Err(e),
            }
        }
        out.push(g);
    }
    Ok(out)
}
