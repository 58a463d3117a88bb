use alloc::vec::Vec;

use crate::model::{ModelSpec, ThetaTable};

/// Relative slack under which two Hamiltonian candidates count as tied.
/// Ties go to the smallest control, then the smallest payment.
pub(crate) const TIE_TOL: f64 = 1e-10;

/// Discrete derivatives of the value function at a point.
///
/// Forward and backward one-sided differences are kept separately so each
/// candidate can pick its upwind direction; a smooth evaluation uses
/// [`Derivatives::central`] where both coincide.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Derivatives {
    pub dw_fwd: f64,
    pub dw_bwd: f64,
    pub dy_fwd: f64,
    pub dy_bwd: f64,
    pub dww: f64,
}

impl Derivatives {
    pub fn central(dw: f64, dy: f64, dww: f64) -> Self {
        Self {
            dw_fwd: dw,
            dw_bwd: dw,
            dy_fwd: dy,
            dy_bwd: dy,
            dww,
        }
    }

    pub(crate) fn lerp(&self, other: &Self, s: f64) -> Self {
        let l = |a: f64, b: f64| if s == 0.0 { a } else if s == 1.0 { b } else { a + (b - a) * s };
        Self {
            dw_fwd: l(self.dw_fwd, other.dw_fwd),
            dw_bwd: l(self.dw_bwd, other.dw_bwd),
            dy_fwd: l(self.dy_fwd, other.dy_fwd),
            dy_bwd: l(self.dy_bwd, other.dy_bwd),
            dww: l(self.dww, other.dww),
        }
    }
}

/// One controlled generator: drifts of `(w, y)`, half the `w` variance,
/// and the running reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub w_drift: f64,
    pub y_drift: f64,
    pub half_var: f64,
    pub reward: f64,
}

impl Candidate {
    /// Upwinded generator applied to the value function plus reward.
    #[inline]
    pub fn evaluate(&self, d: &Derivatives) -> f64 {
        let dw = if self.w_drift > 0.0 { d.dw_fwd } else { d.dw_bwd };
        let dy = if self.y_drift > 0.0 { d.dy_fwd } else { d.dy_bwd };
        self.w_drift * dw + self.y_drift * dy + self.reward + self.half_var * d.dww
    }
}

/// Generator of the principal's problem for one `(control, payment)` pair.
#[inline]
pub(crate) fn principal_candidate(effort: f64, rhs: f64, drift: f64, half_var: f64, pay_util: f64, run_reward: f64) -> Candidate {
    Candidate {
        w_drift: -(pay_util - effort),
        y_drift: rhs,
        half_var,
        reward: drift + run_reward,
    }
}

/// Maximum of the Hamiltonian and its maximizing control and payment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub value: f64,
    pub u_idx: usize,
    pub pi_idx: usize,
    pub u_star: f64,
    pub pi_star: f64,
}

/// Exhaustive maximization over `active x 0..n_pay`.
///
/// The returned value is the exact maximum; the argmax is the
/// lexicographically smallest `(control, payment)` within [`TIE_TOL`] of it.
#[inline]
pub(crate) fn maximize(active: &[usize], n_pay: usize, mut eval: impl FnMut(usize, usize) -> f64) -> (f64, usize, usize) {
    let mut best = f64::NEG_INFINITY;
    for &u in active {
        for p in 0..n_pay {
            let v = eval(u, p);
            if v > best || v.is_nan() {
                best = v;
            }
        }
    }
    if !best.is_finite() {
        return (best, active[0], 0);
    }
    let floor = best - TIE_TOL * (1.0 + best.abs());
    for &u in active {
        for p in 0..n_pay {
            if eval(u, p) >= floor {
                return (best, u, p);
            }
        }
    }
    unreachable!("maximum must be attained")
}

/// The principal's Hamiltonian
///
/// ```text
/// max_{p, a} -(r_A(p) - h(a)) D_w + f(t, y, a) D_y + mu(t, a) + r_P(t, y, p)
///            + (theta(a) sigma)^2 / 2 D_ww
/// ```
///
/// enumerated over the payment set and the incentivizable controls.
pub fn hamiltonian(spec: &ModelSpec, t: f64, y: f64, derivs: &Derivatives, theta: &ThetaTable) -> Optimum {
    let controls = spec.controls();
    let payments = spec.payments();
    let sigma = spec.revenue_vol();
    let active: Vec<usize> = theta.active().collect();
    let pay_util: Vec<f64> = payments.iter().map(|&p| spec.pay_utility(p)).collect();
    let run_reward: Vec<f64> = payments.iter().map(|&p| spec.running_reward(t, y, p)).collect();

    let per_control: Vec<(f64, f64, f64, f64)> = controls
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let th = theta.get(i).unwrap_or(0.0);
            (
                spec.effort_cost(a),
                spec.system_rhs(t, y, a),
                spec.revenue_drift(t, a),
                0.5 * (th * sigma) * (th * sigma),
            )
        })
        .collect();

    let (value, u_idx, pi_idx) = maximize(&active, payments.len(), |u, p| {
        let (h, f, mu, half_var) = per_control[u];
        principal_candidate(h, f, mu, half_var, pay_util[p], run_reward[p]).evaluate(derivs)
    });
    Optimum {
        value,
        u_idx,
        pi_idx,
        u_star: controls[u_idx],
        pi_star: payments[pi_idx],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn all_zero_model_picks_smallest() {
        let spec = ModelSpec::new(1.0, 0.0, 0.0)
            .with_controls(vec![0.0, 1.0])
            .with_payments(vec![0.0, 0.5]);
        let theta = ThetaTable::compute(&spec, 1e-9).unwrap();
        let opt = hamiltonian(&spec, 0.0, 0.0, &Derivatives::central(0.0, 0.0, 0.0), &theta);
        assert_eq!((opt.value, opt.u_star, opt.pi_star), (0.0, 0.0, 0.0));
    }

    #[test]
    fn linear_pay_utility_prefers_zero_payment() {
        let spec = ModelSpec::new(1.0, 0.0, 0.0)
            .with_payments(vec![0.0, 0.1, 0.2])
            .with_pay_utility(|p| p);
        let theta = ThetaTable::compute(&spec, 1e-9).unwrap();
        let opt = hamiltonian(&spec, 0.0, 0.0, &Derivatives::central(1.0, 0.0, 0.0), &theta);
        assert_eq!((opt.value, opt.u_star, opt.pi_star), (0.0, 0.0, 0.0));
    }

    #[test]
    fn upwind_selection_follows_drift_sign() {
        let d = Derivatives {
            dw_fwd: 1.0,
            dw_bwd: 2.0,
            dy_fwd: 10.0,
            dy_bwd: 20.0,
            dww: 0.0,
        };
        let up = Candidate { w_drift: 1.0, y_drift: 1.0, half_var: 0.0, reward: 0.0 };
        let down = Candidate { w_drift: -1.0, y_drift: -1.0, half_var: 0.0, reward: 0.0 };
        assert_eq!(up.evaluate(&d), 11.0);
        assert_eq!(down.evaluate(&d), -22.0);
    }

    #[test]
    fn near_ties_resolve_to_smallest() {
        let (v, u, p) = maximize(&[0, 1], 2, |u, p| if (u, p) == (1, 1) { 1.0 } else { 1.0 - 1e-14 });
        assert_eq!(v, 1.0);
        assert_eq!((u, p), (0, 0));
    }
}
