//! Shared by the oracle test and the acceptance harness.
//!
//! Markov chain approximation oracle: a discrete-time controlled chain on
//! the same lattice, written independently of the library's scheme, with
//! reflecting boundaries.

use dyncon_core::model::families::EndPayFamily;
use dyncon_core::{Grid, ModelSpec};

const T: f64 = 1.0;
const SIGMA: f64 = 0.5;
const GAMMA: f64 = 1.0;
const CONTROLS: [f64; 2] = [0.0, 1.0];
const PAYMENTS: [f64; 2] = [0.0, 0.5];

fn effort(a: f64) -> f64 {
    0.5 * a
}
fn drift(a: f64) -> f64 {
    a
}
fn rhs(y: f64, a: f64) -> f64 {
    a - 0.5 * y
}
fn reward(y: f64, p: f64) -> f64 {
    -p - 0.5 * y * y
}

pub fn spec() -> ModelSpec {
    ModelSpec::new(T, 0.0, 0.0)
        .with_controls(CONTROLS.to_vec())
        .with_payments(PAYMENTS.to_vec())
        .with_effort_cost(effort)
        .with_revenue_drift(|_, a| drift(a))
        .with_revenue_vol(SIGMA)
        .with_system_rhs(|_, y, a| rhs(y, a))
        .with_running_reward(|_, y, p| reward(y, p))
        .with_pay_utility(|p| p)
        .with_end_pay(EndPayFamily::Exponential { risk_aversion: GAMMA }.into_utility())
}

pub fn grid() -> Grid {
    Grid {
        w_min: -0.8,
        w_max: 0.8,
        n_w: 21,
        y_min: -0.6,
        y_max: 2.4,
        n_y: 21,
        horizon: T,
        n_t: 50,
    }
}

/// Value of the chain at `(w, y) = (0, 0)`, which is node `(10, 4)`.
pub fn mca_value(g: &Grid) -> f64 {
    let (nw, ny) = (g.n_w, g.n_y);
    let dw = (g.w_max - g.w_min) / (nw - 1) as f64;
    let dy = (g.y_max - g.y_min) / (ny - 1) as f64;
    let dt = T / g.n_t as f64;
    let w = |i: usize| g.w_min + i as f64 * dw;
    let y = |j: usize| g.y_min + j as f64 * dy;
    // minimal sensitivity making each control a best response, by hand:
    // theta(0) = 0, theta(1) = h(1) - h(0)
    let theta = [0.0, effort(1.0) - effort(0.0)];

    let mut v: Vec<Vec<f64>> = (0..nw)
        .map(|i| (0..ny).map(|_| (1.0 - GAMMA * w(i)).ln() / GAMMA).collect())
        .collect();
    for _ in 0..g.n_t {
        let mut next = v.clone();
        for i in 0..nw {
            for j in 0..ny {
                let mut best = f64::NEG_INFINITY;
                for (k, &a) in CONTROLS.iter().enumerate() {
                    for &p in &PAYMENTS {
                        let bw = -(p - effort(a));
                        let var = (theta[k] * SIGMA).powi(2);
                        let f = rhs(y(j), a);
                        let up_w = dt * (0.5 * var / (dw * dw) + bw.max(0.0) / dw);
                        let dn_w = dt * (0.5 * var / (dw * dw) + (-bw).max(0.0) / dw);
                        let up_y = dt * f.max(0.0) / dy;
                        let dn_y = dt * (-f).max(0.0) / dy;
                        let stay = 1.0 - up_w - dn_w - up_y - dn_y;
                        assert!(stay >= 0.0);
                        let ip = (i + 1).min(nw - 1);
                        let im = i.saturating_sub(1);
                        let jp = (j + 1).min(ny - 1);
                        let jm = j.saturating_sub(1);
                        let ev = stay * v[i][j] + up_w * v[ip][j] + dn_w * v[im][j] + up_y * v[i][jp] + dn_y * v[i][jm];
                        let val = ev + dt * (drift(a) + reward(y(j), p));
                        best = best.max(val);
                    }
                }
                next[i][j] = best;
            }
        }
        v = next;
    }
    v[10][4]
}
