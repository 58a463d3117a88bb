//! Problem description for a principal–agent contract with a controlled
//! engineered system.
//!
//! The agent picks a control `a` that moves both the principal's revenue
//!
//! ```text
//! dx = mu(t, a) dt + sigma dW
//! ```
//!
//! and the system state `dy = f(t, y, a) dt`. The principal only sees `x`.
//! Payoffs are
//!
//! ```text
//! principal:  E[ int (dx + r_P(t, y, p) dt) + q(y_T) - C ]
//! agent:      E[ int (r_A(p) - h(a)) dt + g(C) ]
//! ```

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

pub mod families;
mod hamiltonian;
pub(crate) mod theta;

pub use hamiltonian::{hamiltonian, Candidate, Derivatives, Optimum};
pub use theta::{theta, Sensitivity, ThetaTable};

pub(crate) use hamiltonian::{maximize, principal_candidate};

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Fn3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// End-time pay utility `g` together with its inverse.
#[derive(Clone)]
pub struct EndPayUtility {
    forward: Fn1,
    inverse: Fn1,
}

impl EndPayUtility {
    pub fn new(
        forward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            forward: Arc::new(forward),
            inverse: Arc::new(inverse),
        }
    }

    pub fn identity() -> Self {
        Self::new(|c| c, |w| w)
    }

    #[inline]
    pub fn utility(&self, c: f64) -> f64 {
        (self.forward)(c)
    }

    #[inline]
    pub fn inverse(&self, w: f64) -> f64 {
        (self.inverse)(w)
    }
}

impl fmt::Debug for EndPayUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("EndPayUtility")
    }
}

/// A complete problem instance. Immutable once built and cheap to clone.
#[derive(Clone)]
pub struct ModelSpec {
    revenue_drift: Fn2,
    revenue_vol: f64,
    system_rhs: Fn3,
    running_reward: Fn3,
    terminal_reward: Fn1,
    pay_utility: Fn1,
    effort_cost: Fn1,
    end_pay: EndPayUtility,
    controls: Vec<f64>,
    payments: Vec<f64>,
    horizon: f64,
    participation: f64,
    y0: f64,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("revenue_vol", &self.revenue_vol)
            .field("controls", &self.controls)
            .field("payments", &self.payments)
            .field("horizon", &self.horizon)
            .field("participation", &self.participation)
            .field("y0", &self.y0)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    /// The all-zero model: no drift, no noise, no rewards or costs,
    /// `g` the identity, singleton control and payment sets `{0}`.
    pub fn new(horizon: f64, participation: f64, y0: f64) -> Self {
        Self {
            revenue_drift: Arc::new(|_, _| 0.0),
            revenue_vol: 0.0,
            system_rhs: Arc::new(|_, _, _| 0.0),
            running_reward: Arc::new(|_, _, _| 0.0),
            terminal_reward: Arc::new(|_| 0.0),
            pay_utility: Arc::new(|_| 0.0),
            effort_cost: Arc::new(|_| 0.0),
            end_pay: EndPayUtility::identity(),
            controls: alloc::vec![0.0],
            payments: alloc::vec![0.0],
            horizon,
            participation,
            y0,
        }
    }

    /// `mu(t, a)`
    pub fn with_revenue_drift(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.revenue_drift = Arc::new(f);
        self
    }

    pub fn with_revenue_vol(mut self, sigma: f64) -> Self {
        self.revenue_vol = sigma;
        self
    }

    /// `f(t, y, a)`
    pub fn with_system_rhs(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.system_rhs = Arc::new(f);
        self
    }

    /// `r_P(t, y, p)`
    pub fn with_running_reward(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.running_reward = Arc::new(f);
        self
    }

    /// `q(y)`
    pub fn with_terminal_reward(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.terminal_reward = Arc::new(f);
        self
    }

    /// `r_A(p)`
    pub fn with_pay_utility(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.pay_utility = Arc::new(f);
        self
    }

    /// `h(a)`
    pub fn with_effort_cost(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.effort_cost = Arc::new(f);
        self
    }

    pub fn with_end_pay(mut self, g: EndPayUtility) -> Self {
        self.end_pay = g;
        self
    }

    pub fn with_controls(mut self, controls: Vec<f64>) -> Self {
        self.controls = controls;
        self
    }

    pub fn with_payments(mut self, payments: Vec<f64>) -> Self {
        self.payments = payments;
        self
    }

    pub fn with_participation(mut self, b: f64) -> Self {
        self.participation = b;
        self
    }

    #[inline]
    pub fn revenue_drift(&self, t: f64, a: f64) -> f64 {
        (self.revenue_drift)(t, a)
    }

    #[inline]
    pub fn revenue_vol(&self) -> f64 {
        self.revenue_vol
    }

    #[inline]
    pub fn system_rhs(&self, t: f64, y: f64, a: f64) -> f64 {
        (self.system_rhs)(t, y, a)
    }

    #[inline]
    pub fn running_reward(&self, t: f64, y: f64, p: f64) -> f64 {
        (self.running_reward)(t, y, p)
    }

    #[inline]
    pub fn terminal_reward(&self, y: f64) -> f64 {
        (self.terminal_reward)(y)
    }

    #[inline]
    pub fn pay_utility(&self, p: f64) -> f64 {
        (self.pay_utility)(p)
    }

    #[inline]
    pub fn effort_cost(&self, a: f64) -> f64 {
        (self.effort_cost)(a)
    }

    #[inline]
    pub fn end_pay(&self) -> &EndPayUtility {
        &self.end_pay
    }

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    pub fn payments(&self) -> &[f64] {
        &self.payments
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// The participation payoff `b`.
    pub fn participation(&self) -> f64 {
        self.participation
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    /// Checks the invariants that do not depend on a state range.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidModel(msg));
        if !(self.revenue_vol >= 0.0 && self.revenue_vol.is_finite()) {
            return bad(format!("revenue volatility must be finite and >= 0, got {}", self.revenue_vol));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be finite and > 0, got {}", self.horizon));
        }
        if !self.participation.is_finite() || !self.y0.is_finite() {
            return bad("participation payoff and y0 must be finite".into());
        }
        check_sorted("control set", &self.controls)?;
        check_sorted("payment set", &self.payments)?;
        for pair in self.controls.windows(2) {
            let (h0, h1) = (self.effort_cost(pair[0]), self.effort_cost(pair[1]));
            if h1 < h0 {
                return bad(format!(
                    "effort cost must be non-decreasing on the control set: h({}) = {} > h({}) = {}",
                    pair[0], h0, pair[1], h1
                ));
            }
        }
        Ok(())
    }

    /// Checks that `g` is strictly increasing with a faithful inverse on
    /// `w_range`, and returns an empirical Lipschitz estimate of `f` in `y`
    /// over `y_range` (sampled at `samples` points and `t = 0, T/2, T`).
    pub fn validate_on(&self, w_range: (f64, f64), y_range: (f64, f64), samples: usize) -> Result<f64> {
        self.validate()?;
        let samples = samples.max(3);
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..samples {
            let w = lerp(w_range.0, w_range.1, k as f64 / (samples - 1) as f64);
            let c = self.end_pay.inverse(w);
            let back = self.end_pay.utility(c);
            if !c.is_finite() || (back - w).abs() > 1e-9 * (1.0 + w.abs()) {
                return Err(Error::InvalidModel(format!(
                    "end-pay inverse is not faithful at w = {w}: g(g^-1(w)) = {back}"
                )));
            }
            if let Some((_, c_prev)) = prev {
                if !(c > c_prev) {
                    return Err(Error::InvalidModel(format!(
                        "end-pay utility is not strictly increasing near w = {w}"
                    )));
                }
            }
            prev = Some((w, c));
        }

        let mut lip: f64 = 0.0;
        let times = [0.0, 0.5 * self.horizon, self.horizon];
        for &t in &times {
            for &a in &self.controls {
                let mut last: Option<(f64, f64)> = None;
                for k in 0..samples {
                    let y = lerp(y_range.0, y_range.1, k as f64 / (samples - 1) as f64);
                    let fy = self.system_rhs(t, y, a);
                    if !fy.is_finite() {
                        return Err(Error::InvalidModel(format!("system rhs is not finite at y = {y}, a = {a}")));
                    }
                    if let Some((y_prev, f_prev)) = last {
                        if y > y_prev {
                            lip = lip.max((fy - f_prev).abs() / (y - y_prev));
                        }
                    }
                    last = Some((y, fy));
                }
            }
        }
        Ok(lip)
    }
}

fn check_sorted(what: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidModel(format!("{what} is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidModel(format!("{what} contains a non-finite value")));
    }
    if values.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::InvalidModel(format!("{what} must be sorted strictly ascending")));
    }
    Ok(())
}

#[inline]
pub(crate) fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_unsorted_controls() {
        let spec = ModelSpec::new(1.0, 0.0, 0.0).with_controls(vec![1.0, 0.0]);
        assert!(matches!(spec.validate(), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn rejects_decreasing_effort_cost() {
        let spec = ModelSpec::new(1.0, 0.0, 0.0)
            .with_controls(vec![0.0, 1.0])
            .with_effort_cost(|a| -a);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn rejects_non_invertible_end_pay() {
        let spec = ModelSpec::new(1.0, 0.0, 0.0).with_end_pay(EndPayUtility::new(|c| c, |w| 2.0 * w));
        assert!(spec.validate_on((-1.0, 1.0), (0.0, 1.0), 11).is_err());
    }

    #[test]
    fn lipschitz_estimate_of_linear_rhs() {
        let spec = ModelSpec::new(1.0, 0.0, 0.0).with_system_rhs(|_, y, a| -0.3 * y + a);
        let lip = spec.validate_on((-1.0, 1.0), (-2.0, 2.0), 21).unwrap();
        assert!((lip - 0.3).abs() < 1e-12);
    }
}
