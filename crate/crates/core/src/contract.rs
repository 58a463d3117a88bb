//! Contract synthesis: forward simulation of the revenue process, the
//! principal's bookkeeping of the agent's continuation value, and the
//! inferred system state, all driven by the solved feedback maps.
//!
//! Per step of length `D` with `(u*, pi*)` read off the field at `(w*, y*, t)`:
//!
//! ```text
//! dx  = mu(t, a) D + sigma sqrt(D) Z          (a = control actually applied)
//! dw* = -(r_A(pi*) - h(u*)) D + theta(u*) (dx - mu(t, u*) D)
//! dy* = f(t, y*, u*) D
//! ```
//!
//! with `w*_0 = b`, `y*_0 = y0`, and end-time pay `C* = g^{-1}(w*_T)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hjb::{PolicyLookup, ValueField};
use crate::model::ModelSpec;
use crate::rng::{NormalStream, PathSeed};

/// One realized contract trajectory. Per-step arrays (`u_star`, `pi_star`,
/// `xi`) have one entry fewer than the state arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractPath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub w_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub u_star: Vec<f64>,
    pub pi_star: Vec<f64>,
    pub xi: Vec<f64>,
    pub end_pay: f64,
    pub seed: PathSeed,
}

impl ContractPath {
    pub fn n_steps(&self) -> usize {
        self.u_star.len()
    }
}

/// A path together with both parties' realized payoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub path: ContractPath,
    /// `sum (mu(t, u*) + r_P(t, y*, pi*)) D + q(y*_T) - C*`
    pub principal_payoff: f64,
    /// `sum (r_A(pi*) - h(a)) D + g(C*)`, with `a` the applied control.
    pub agent_payoff: f64,
}

/// Chooses the control index the agent actually applies at step `k`
/// (time `t`) given the recommended index.
pub trait ControlRule: Sync {
    fn apply(&self, k: usize, t: f64, recommended: usize) -> usize;
}

/// Always applies the recommendation.
pub struct Follow;

impl ControlRule for Follow {
    #[inline]
    fn apply(&self, _k: usize, _t: f64, recommended: usize) -> usize {
        recommended
    }
}

pub(crate) fn simulate(
    lookup: &PolicyLookup<'_>,
    seed: PathSeed,
    n_steps: usize,
    rule: &dyn ControlRule,
) -> Result<SimulatedPath> {
    let field = lookup.field();
    let spec = lookup.spec();
    let grid = field.grid();
    if n_steps < grid.n_t {
        return Err(Error::InvalidGrid(alloc::format!(
            "path needs at least as many steps as the solver ({} < {})",
            n_steps,
            grid.n_t
        )));
    }
    let horizon = spec.horizon();
    let dt = horizon / n_steps as f64;
    let sqrt_dt = libm::sqrt(dt);
    let sigma = spec.revenue_vol();
    let controls = field.controls();
    let payments = field.payments();
    let mut noise = NormalStream::new(seed);

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut x = Vec::with_capacity(n_steps + 1);
    let mut w_star = Vec::with_capacity(n_steps + 1);
    let mut y_star = Vec::with_capacity(n_steps + 1);
    let mut u_star = Vec::with_capacity(n_steps);
    let mut pi_star = Vec::with_capacity(n_steps);
    let mut xi = Vec::with_capacity(n_steps);

    let (mut xk, mut w, mut y) = (0.0, spec.participation(), spec.y0());
    times.push(0.0);
    x.push(xk);
    w_star.push(w);
    y_star.push(y);
    let mut principal = 0.0;
    let mut agent = 0.0;

    for k in 0..n_steps {
        let t = k as f64 * dt;
        let step = k * grid.n_t / n_steps;
        let opt = lookup.at_step(w, y, step)?;
        let (u, p) = (controls[opt.u_idx], payments[opt.pi_idx]);
        let applied = controls[rule.apply(k, t, opt.u_idx)];
        let theta = field.theta().get(opt.u_idx).unwrap_or(0.0);

        let mu_rec = spec.revenue_drift(t, u);
        let mu_act = if applied == u { mu_rec } else { spec.revenue_drift(t, applied) };
        let dx = mu_act * dt + sigma * sqrt_dt * noise.next_normal();
        let pay_util = spec.pay_utility(p);
        let dw = -(pay_util - spec.effort_cost(u)) * dt + theta * (dx - mu_rec * dt);
        let dy = spec.system_rhs(t, y, u) * dt;

        principal += (mu_rec + spec.running_reward(t, y, p)) * dt;
        agent += (pay_util - spec.effort_cost(applied)) * dt;

        xk += dx;
        w += dw;
        y += dy;
        if !grid.contains(w, y) {
            return Err(Error::GridEscape { step: k + 1, w, y });
        }
        times.push(if k + 1 == n_steps { horizon } else { (k + 1) as f64 * dt });
        x.push(xk);
        w_star.push(w);
        y_star.push(y);
        u_star.push(u);
        pi_star.push(p);
        xi.push(theta);
    }

    let end_pay = spec.end_pay().inverse(w);
    principal += spec.terminal_reward(y) - end_pay;
    agent += spec.end_pay().utility(end_pay);
    Ok(SimulatedPath {
        path: ContractPath {
            times,
            x,
            w_star,
            y_star,
            u_star,
            pi_star,
            xi,
            end_pay,
            seed,
        },
        principal_payoff: principal,
        agent_payoff: agent,
    })
}

/// Forward-simulates the contract along the Brownian path named by `seed`.
/// Identical inputs give bit-identical paths.
pub fn synthesize_path(field: &ValueField, spec: &ModelSpec, seed: PathSeed, n_steps: usize) -> Result<ContractPath> {
    simulate_path(field, spec, seed, n_steps).map(|s| s.path)
}

/// As [`synthesize_path`], keeping the realized payoffs.
pub fn simulate_path(field: &ValueField, spec: &ModelSpec, seed: PathSeed, n_steps: usize) -> Result<SimulatedPath> {
    simulate(&PolicyLookup::new(field, spec), seed, n_steps, &Follow)
}

/// Mean and standard error of a Monte Carlo sample.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Summed in index order so the result is independent of scheduling.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self { mean, se: 0.0 };
        }
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        Self {
            mean,
            se: libm::sqrt(var / n as f64),
        }
    }

    /// `|mean - target| <= k * se`
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub n_steps: usize,
    pub base_seed: u64,
    pub principal: Estimate,
    pub agent: Estimate,
    pub end_pay: Estimate,
    pub terminal_w: Estimate,
    /// Mean fraction of time steps with `u*` at its largest value.
    pub mean_max_control_share: f64,
}

/// Runs `f` on paths `0..n_paths`, collecting results in index order.
/// Returns the error of the lowest-indexed failing path, if any.
pub(crate) fn run_indexed<R: Send>(n_paths: usize, f: impl Fn(u64) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    #[cfg(feature = "std")]
    let results: Vec<Result<R>> = {
        use rayon::prelude::*;
        (0..n_paths as u64).into_par_iter().map(f).collect()
    };
    #[cfg(not(feature = "std"))]
    let results: Vec<Result<R>> = (0..n_paths as u64).map(f).collect();
    results.into_iter().collect()
}

/// Simulates `n_paths` paths (path `k` on stream `k` of `base_seed`) and
/// maps each one through `inspect`.
pub fn ensemble_map<R: Send>(
    field: &ValueField,
    spec: &ModelSpec,
    n_paths: usize,
    n_steps: usize,
    base_seed: u64,
    inspect: impl Fn(&SimulatedPath) -> R + Sync + Send,
) -> Result<Vec<R>> {
    let lookup = PolicyLookup::new(field, spec);
    run_indexed(n_paths, |k| {
        simulate(&lookup, PathSeed::new(base_seed, k), n_steps, &Follow).map(|s| inspect(&s))
    })
}

pub fn ensemble(field: &ValueField, spec: &ModelSpec, n_paths: usize, n_steps: usize, base_seed: u64) -> Result<EnsembleSummary> {
    if n_paths < 2 {
        return Err(Error::InvalidModel("an ensemble needs at least two paths".into()));
    }
    let u_max = spec.controls().last().copied().unwrap_or(0.0);
    let rows = ensemble_map(field, spec, n_paths, n_steps, base_seed, |s| {
        let on = s.path.u_star.iter().filter(|&&u| u == u_max).count();
        (
            s.principal_payoff,
            s.agent_payoff,
            s.path.end_pay,
            *s.path.w_star.last().unwrap(),
            on as f64 / s.path.n_steps() as f64,
        )
    })?;
    let col = |f: fn(&(f64, f64, f64, f64, f64)) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let share = col(|r| r.4);
    Ok(EnsembleSummary {
        n_paths,
        n_steps,
        base_seed,
        principal: Estimate::from_samples(&col(|r| r.0)),
        agent: Estimate::from_samples(&col(|r| r.1)),
        end_pay: Estimate::from_samples(&col(|r| r.2)),
        terminal_w: Estimate::from_samples(&col(|r| r.3)),
        mean_max_control_share: share.iter().sum::<f64>() / n_paths as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::hjb::solve;
    use alloc::vec;

    fn grid(horizon: f64) -> Grid {
        Grid {
            w_min: -5.0,
            w_max: 5.0,
            n_w: 11,
            y_min: -1.0,
            y_max: 1.0,
            n_y: 5,
            horizon,
            n_t: 20,
        }
    }

    #[test]
    fn trivial_model_pays_participation() {
        let spec = ModelSpec::new(2.0, 0.7, 0.0);
        let field = solve(&spec, &grid(2.0)).unwrap();
        let path = synthesize_path(&field, &spec, PathSeed::new(1, 0), 40).unwrap();
        assert!(path.w_star.iter().all(|&w| w == 0.7));
        assert_eq!(path.end_pay, 0.7);
        let s = ensemble(&field, &spec, 8, 40, 3).unwrap();
        assert!((s.principal.mean + 0.7).abs() < 1e-12 && s.principal.se < 1e-12);
        assert!((s.agent.mean - 0.7).abs() < 1e-12 && s.agent.se < 1e-12);
    }

    #[test]
    fn constant_payment_drifts_linearly() {
        // the only payment is 0.5 and r_A(p) = p, so w* = b - 0.5 t
        let spec = ModelSpec::new(2.0, 0.7, 0.0)
            .with_payments(vec![0.5])
            .with_pay_utility(|p| p);
        let field = solve(&spec, &grid(2.0)).unwrap();
        let path = synthesize_path(&field, &spec, PathSeed::new(1, 0), 40).unwrap();
        for (t, w) in path.times.iter().zip(&path.w_star) {
            assert!((w - (0.7 - 0.5 * t)).abs() < 1e-12);
        }
        assert!((path.end_pay - (0.7 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn too_few_steps_is_rejected() {
        let spec = ModelSpec::new(2.0, 0.7, 0.0);
        let field = solve(&spec, &grid(2.0)).unwrap();
        assert!(synthesize_path(&field, &spec, PathSeed::new(1, 0), 10).is_err());
    }

    #[test]
    fn escaping_paths_abort() {
        // effort pays off, so u* = 1 with theta = 1 and w* diffuses fast
        let spec = ModelSpec::new(2.0, 0.0, 0.0)
            .with_controls(vec![0.0, 1.0])
            .with_effort_cost(|a| a)
            .with_revenue_drift(|_, a| 10.0 * a)
            .with_revenue_vol(5.0);
        let g = Grid {
            w_min: -1.0,
            w_max: 1.0,
            n_w: 5,
            n_t: 500,
            ..grid(2.0)
        };
        let field = solve(&spec, &g).unwrap();
        let err = synthesize_path(&field, &spec, PathSeed::new(0, 0), 500).unwrap_err();
        assert!(matches!(err, Error::GridEscape { step, .. } if step > 0 && step <= 500));
    }

    #[test]
    fn estimate_of_constant_sample() {
        let e = Estimate::from_samples(&[2.0; 5]);
        assert_eq!((e.mean, e.se), (2.0, 0.0));
        let e = Estimate::from_samples(&[1.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert!((e.se - 1.0).abs() < 1e-15);
    }
}
