//! Incentive-compatibility checks for a solved contract.
//!
//! Three independent witnesses: the agent's own dynamic program against the
//! frozen feedback maps, Monte Carlo payoffs of a fixed family of deviation
//! strategies, and the pointwise argmax condition on the stored policy.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::contract::{run_indexed, simulate, ControlRule, Estimate, Follow};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hjb::scheme::{interpolate, sweep, StepOperator};
use crate::hjb::{PolicyLookup, ValueField};
use crate::model::theta::argmax_gap;
use crate::model::{Candidate, Derivatives, ModelSpec};
use crate::rng::PathSeed;

/// A deviation the agent may play instead of the recommendation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Follow,
    /// Always the control with this index.
    Constant(usize),
    /// Always the smallest control.
    Lazy,
    /// Smallest control before `at`, largest from `at` on.
    SwitchUp { at: f64 },
    /// Largest control before `at`, smallest from `at` on.
    SwitchDown { at: f64 },
}

impl Strategy {
    pub fn name(&self, controls: &[f64]) -> String {
        match *self {
            Strategy::Follow => "follow".into(),
            Strategy::Constant(k) => format!("constant(a={})", controls[k]),
            Strategy::Lazy => "lazy".into(),
            Strategy::SwitchUp { at } => format!("switch_up(t={at})"),
            Strategy::SwitchDown { at } => format!("switch_down(t={at})"),
        }
    }

    /// Follow, every constant control, lazy, and both bang-bang switches at
    /// `k` evenly spaced interior times.
    pub fn standard_family(n_controls: usize, horizon: f64, k: usize) -> Vec<Strategy> {
        let mut out = vec![Strategy::Follow];
        out.extend((0..n_controls).map(Strategy::Constant));
        out.push(Strategy::Lazy);
        for m in 1..=k {
            let at = horizon * m as f64 / (k + 1) as f64;
            out.push(Strategy::SwitchUp { at });
            out.push(Strategy::SwitchDown { at });
        }
        out
    }
}

struct StrategyRule {
    strategy: Strategy,
    last: usize,
}

impl ControlRule for StrategyRule {
    fn apply(&self, _k: usize, t: f64, recommended: usize) -> usize {
        match self.strategy {
            Strategy::Follow => recommended,
            Strategy::Constant(k) => k,
            Strategy::Lazy => 0,
            Strategy::SwitchUp { at } => {
                if t < at {
                    0
                } else {
                    self.last
                }
            }
            Strategy::SwitchDown { at } => {
                if t < at {
                    self.last
                } else {
                    0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StrategyRow {
    pub name: String,
    pub payoff: Estimate,
}

/// Monte Carlo payoff of each strategy, all on the same Brownian paths.
pub fn deviation_mc(
    field: &ValueField,
    spec: &ModelSpec,
    strategies: &[Strategy],
    n_paths: usize,
    n_steps: usize,
    base_seed: u64,
) -> Result<Vec<StrategyRow>> {
    let lookup = PolicyLookup::new(field, spec);
    let controls = spec.controls();
    let mut rows = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        if let Strategy::Constant(k) = strategy {
            if k >= controls.len() {
                return Err(Error::InvalidModel(format!("strategy uses control index {k} out of range")));
            }
        }
        let samples = match strategy {
            Strategy::Follow => run_indexed(n_paths, |k| {
                simulate(&lookup, PathSeed::new(base_seed, k), n_steps, &Follow).map(|s| s.agent_payoff)
            })?,
            _ => {
                let rule = StrategyRule {
                    strategy,
                    last: controls.len() - 1,
                };
                run_indexed(n_paths, |k| {
                    simulate(&lookup, PathSeed::new(base_seed, k), n_steps, &rule).map(|s| s.agent_payoff)
                })?
            }
        };
        rows.push(StrategyRow {
            name: strategy.name(controls),
            payoff: Estimate::from_samples(&samples),
        });
    }
    Ok(rows)
}

/// `max over stored policy nodes of max_a {-h(a) + theta(u*) a} - (-h(u*) + theta(u*) u*)`.
pub fn pointwise_ic_check(field: &ValueField, spec: &ModelSpec) -> f64 {
    let controls = field.controls();
    let costs: Vec<f64> = controls.iter().map(|&a| spec.effort_cost(a)).collect();
    let mut used = vec![false; controls.len()];
    for &u in field.policy_u_indices() {
        used[u as usize] = true;
    }
    let mut worst: f64 = 0.0;
    for (u, _) in used.iter().enumerate().filter(|(_, &on)| on) {
        let z = field.theta().get(u).unwrap_or(0.0);
        worst = worst.max(argmax_gap(u, z, controls, &costs));
    }
    worst
}

struct AgentOperator<'a> {
    spec: &'a ModelSpec,
    field: &'a ValueField,
    grid: &'a Grid,
    /// agent steps per field step
    substeps: usize,
    effort: Vec<f64>,
    pay_util: Vec<f64>,
    theta: Vec<f64>,
}

struct AgentTables {
    field_step: usize,
    drift: Vec<f64>,
    /// `f(t, y_j, a)` at `[j * n_u + a]`
    rhs: Vec<f64>,
}

impl<'a> AgentOperator<'a> {
    fn new(spec: &'a ModelSpec, field: &'a ValueField, grid: &'a Grid, substeps: usize) -> Self {
        Self {
            spec,
            field,
            grid,
            substeps,
            effort: spec.controls().iter().map(|&a| spec.effort_cost(a)).collect(),
            pay_util: spec.payments().iter().map(|&p| spec.pay_utility(p)).collect(),
            theta: (0..spec.controls().len())
                .map(|u| field.theta().get(u).unwrap_or(0.0))
                .collect(),
        }
    }

    /// Generator for deviation `a` against the frozen recommendation.
    #[inline]
    fn candidate(&self, tables: &AgentTables, j: usize, u: usize, p: usize, a: usize) -> Candidate {
        let n_u = self.effort.len();
        let th = self.theta[u];
        let s = th * self.spec.revenue_vol();
        Candidate {
            w_drift: -(self.pay_util[p] - self.effort[u]) + th * (tables.drift[a] - tables.drift[u]),
            y_drift: tables.rhs[j * n_u + u],
            half_var: 0.5 * s * s,
            reward: self.pay_util[p] - self.effort[a],
        }
    }

    /// Per-unit-time monotonicity rate, maximized over nodes and deviations.
    fn rate(&self) -> Result<f64> {
        let (dw, dy) = (self.grid.dw(), self.grid.dy());
        let mut worst: f64 = 0.0;
        for n in 0..self.grid.n_t {
            let tables = self.prepare(n)?;
            for i in 0..self.grid.n_w {
                for j in 0..self.grid.n_y {
                    let (u, p) = self.field.policy_index(tables.field_step, i, j);
                    for a in 0..self.effort.len() {
                        let c = self.candidate(&tables, j, u, p, a);
                        let r = c.w_drift.abs() / dw + 2.0 * c.half_var / (dw * dw) + c.y_drift.abs() / dy;
                        worst = worst.max(r);
                    }
                }
            }
        }
        Ok(worst)
    }
}

impl StepOperator for AgentOperator<'_> {
    type Tables = AgentTables;

    fn prepare(&self, n: usize) -> Result<AgentTables> {
        let t = self.grid.t_mid(n);
        let controls = self.spec.controls();
        let mut rhs = Vec::with_capacity(self.grid.n_y * controls.len());
        for j in 0..self.grid.n_y {
            let y = self.grid.y(j);
            rhs.extend(controls.iter().map(|&a| self.spec.system_rhs(t, y, a)));
        }
        Ok(AgentTables {
            field_step: n / self.substeps,
            drift: controls.iter().map(|&a| self.spec.revenue_drift(t, a)).collect(),
            rhs,
        })
    }

    #[inline]
    fn node(&self, tables: &AgentTables, i: usize, j: usize, d: &Derivatives) -> (f64, u16, u16) {
        let (u, p) = self.field.policy_index(tables.field_step, i, j);
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for a in 0..self.effort.len() {
            let v = self.candidate(tables, j, u, p, a).evaluate(d);
            if v > best {
                best = v;
                arg = a;
            }
        }
        (best, arg as u16, p as u16)
    }
}

/// Smallest number of agent steps per field step that keeps the agent's
/// scheme monotone.
pub fn agent_substeps(field: &ValueField, spec: &ModelSpec) -> Result<usize> {
    let grid = *field.grid();
    let op = AgentOperator::new(spec, field, &grid, 1);
    let rate = op.rate()?;
    let s = libm::ceil(rate * grid.dt()).max(1.0);
    if !s.is_finite() || s > 1e6 {
        return Err(Error::CflViolation {
            detail: format!("agent problem needs {s} substeps per solver step"),
        });
    }
    Ok(s as usize)
}

/// Agent's optimal deviation value at `(b, y0, 0)`, solved on the field's
/// spatial grid with `substeps` agent steps per solver step.
pub fn agent_best_response_with(field: &ValueField, spec: &ModelSpec, substeps: usize) -> Result<f64> {
    if substeps == 0 {
        return Err(Error::InvalidGrid("agent substeps must be positive".into()));
    }
    let grid = Grid {
        n_t: field.grid().n_t * substeps,
        ..*field.grid()
    };
    let op = AgentOperator::new(spec, field, &grid, substeps);
    let combined = op.rate()? * grid.dt();
    if !(combined <= 1.0) {
        return Err(Error::CflViolation {
            detail: format!("agent monotonicity number {combined:.4} exceeds 1"),
        });
    }
    let g = spec.end_pay();
    let mut terminal = vec![0.0; grid.slice_len()];
    for i in 0..grid.n_w {
        let v = g.utility(g.inverse(grid.w(i)));
        terminal[i * grid.n_y..(i + 1) * grid.n_y].fill(v);
    }
    let out = sweep(&grid, &terminal, &op, false)?;
    let (b, y0) = (spec.participation(), spec.y0());
    interpolate(&out.phi, &grid, b, y0).ok_or(Error::OutOfBounds { w: b, y: y0, t: 0.0 })
}

/// [`agent_best_response_with`] at the smallest stable substep count.
pub fn agent_best_response(field: &ValueField, spec: &ModelSpec) -> Result<f64> {
    agent_best_response_with(field, spec, agent_substeps(field, spec)?)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct VerifyOptions {
    pub n_paths: usize,
    pub n_steps: usize,
    pub base_seed: u64,
    /// Number of switch times for the bang-bang strategies.
    pub switch_times: usize,
    /// Principal-side discretization gap (e.g. from a convergence report).
    pub principal_gap: f64,
    /// Floor added to every tolerance, relative to `1 + |b|`.
    pub rel_floor: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            n_paths: 2000,
            n_steps: 0,
            base_seed: 0,
            switch_times: 3,
            principal_gap: 0.0,
            rel_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviationReport {
    pub participation: f64,
    pub best_response_value: f64,
    /// Agent payoff when following the recommendation.
    pub recommended_value: Estimate,
    pub strategy_table: Vec<StrategyRow>,
    pub tolerance: f64,
    /// Agent-side gap between one and two times the substep count.
    pub agent_gap: f64,
    pub pointwise_violation: f64,
    pub pointwise_ok: bool,
    /// `|best_response_value - b| <= tolerance`
    pub best_response_ok: bool,
    /// Every strategy mean `<= b + 3 SE + floor`.
    pub no_profitable_deviation: bool,
    /// Every strategy mean `- 3 SE <= best_response_value + tolerance`.
    pub table_consistent: bool,
}

impl DeviationReport {
    pub fn passed(&self) -> bool {
        self.pointwise_ok && self.best_response_ok && self.no_profitable_deviation && self.table_consistent
    }
}

/// Runs all three checks. `opts.n_steps == 0` uses the solver's step count.
pub fn verify(field: &ValueField, spec: &ModelSpec, opts: &VerifyOptions) -> Result<DeviationReport> {
    let b = spec.participation();
    let floor = opts.rel_floor * (1.0 + b.abs());
    let n_steps = if opts.n_steps == 0 { field.grid().n_t } else { opts.n_steps };

    let pointwise = pointwise_ic_check(field, spec);
    let s = agent_substeps(field, spec)?;
    let best = agent_best_response_with(field, spec, s)?;
    let fine = agent_best_response_with(field, spec, 2 * s)?;
    let agent_gap = (fine - best).abs();
    let tolerance = opts.principal_gap + agent_gap + floor;

    let strategies = Strategy::standard_family(spec.controls().len(), spec.horizon(), opts.switch_times);
    let table = deviation_mc(field, spec, &strategies, opts.n_paths, n_steps, opts.base_seed)?;
    let recommended = table[0].payoff;

    let no_profitable_deviation = table.iter().all(|r| r.payoff.mean <= b + 3.0 * r.payoff.se + floor);
    let table_consistent = table
        .iter()
        .all(|r| r.payoff.mean - 3.0 * r.payoff.se <= best + tolerance);
    Ok(DeviationReport {
        participation: b,
        best_response_value: best,
        recommended_value: recommended,
        strategy_table: table,
        tolerance,
        agent_gap,
        pointwise_violation: pointwise,
        pointwise_ok: pointwise == 0.0,
        best_response_ok: (best - b).abs() <= tolerance,
        no_profitable_deviation,
        table_consistent,
    })
}
