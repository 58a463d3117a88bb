//! Incentive sensitivity: the smallest exposure `z` of the agent's
//! continuation value to revenue noise under which a control is a best
//! response, `theta(a) = min { z >= 0 : a in argmax_b { -h(b) + z b } }`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// A non-negative sensitivity value (`xi` or `theta(a)`).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sensitivity(f64);

impl Sensitivity {
    pub fn new(value: f64) -> Option<Self> {
        (value >= 0.0 && value.is_finite()).then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Whether `controls[idx]` attains `max_b { -h(b) + z b }`. Ties count.
pub(crate) fn in_argmax(idx: usize, z: f64, controls: &[f64], costs: &[f64]) -> bool {
    let own = -costs[idx] + z * controls[idx];
    controls
        .iter()
        .zip(costs)
        .all(|(&b, &hb)| -hb + z * b <= own)
}

/// Gap between the agent's best pointwise payoff and that of `controls[idx]`
/// at sensitivity `z`; zero iff `idx` is in the argmax.
pub(crate) fn argmax_gap(idx: usize, z: f64, controls: &[f64], costs: &[f64]) -> f64 {
    let own = -costs[idx] + z * controls[idx];
    let best = controls
        .iter()
        .zip(costs)
        .map(|(&b, &hb)| -hb + z * b)
        .fold(f64::NEG_INFINITY, f64::max);
    best - own
}

/// Computes `theta(a)` by bisection on argmax membership, to within `z_tol`.
///
/// The returned value always satisfies the membership predicate as
/// evaluated in floating point, so `-h(a) + theta(a) a` is exactly the
/// maximum over the control set.
pub fn theta(a: f64, spec: &ModelSpec, z_max: f64, z_tol: f64) -> Result<Sensitivity> {
    let controls = spec.controls();
    let idx = controls
        .iter()
        .position(|&c| c == a)
        .ok_or_else(|| Error::InvalidModel(alloc::format!("control {a} is not in the control set")))?;
    let costs: Vec<f64> = controls.iter().map(|&c| spec.effort_cost(c)).collect();
    theta_by_index(idx, controls, &costs, z_max, z_tol)
}

pub(crate) fn theta_by_index(idx: usize, controls: &[f64], costs: &[f64], z_max: f64, z_tol: f64) -> Result<Sensitivity> {
    if !(z_tol > 0.0) || !(z_max >= 0.0) {
        return Err(Error::InvalidModel(alloc::format!(
            "theta needs z_tol > 0 and z_max >= 0 (got {z_tol}, {z_max})"
        )));
    }
    let member = |z: f64| in_argmax(idx, z, controls, costs);
    let never = || Error::NoIncentivizingSensitivity {
        control: controls[idx],
        z_max,
    };

    if member(0.0) {
        return Ok(Sensitivity(0.0));
    }

    // Membership is an interval [lo, hi] in z (intersection of half-lines),
    // so any member point bounds the bisection from above.
    let hi = if member(z_max) {
        z_max
    } else {
        let (lo, up) = slope_bracket(idx, controls, costs);
        let up = up.min(z_max);
        if lo > up + z_tol {
            return Err(never());
        }
        let probes = [up, 0.5 * (lo + up), lo];
        match probes.iter().copied().find(|&z| z >= 0.0 && z <= z_max && member(z)) {
            Some(z) => z,
            None => {
                // Degenerate interval lost to rounding: scan the neighbourhood.
                let start = (lo - 4.0 * z_tol).max(0.0);
                let stop = (up + 4.0 * z_tol).min(z_max);
                let mut z = start;
                loop {
                    if member(z) {
                        break z;
                    }
                    z += z_tol;
                    if z > stop {
                        return Err(never());
                    }
                }
            }
        }
    };

    let (mut lo, mut hi) = (0.0_f64, hi);
    while hi - lo > z_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if member(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Sensitivity(hi))
}

/// Exact lower/upper slope bounds on the membership interval.
fn slope_bracket(idx: usize, controls: &[f64], costs: &[f64]) -> (f64, f64) {
    let (a, ha) = (controls[idx], costs[idx]);
    let mut lo: f64 = 0.0;
    let mut up = f64::INFINITY;
    for (&b, &hb) in controls.iter().zip(costs) {
        if b < a {
            lo = lo.max((ha - hb) / (a - b));
        } else if b > a {
            up = up.min((hb - ha) / (b - a));
        }
    }
    (lo, up)
}

/// `theta` for every control, with `None` marking controls that no
/// sensitivity makes incentive compatible. Those are dropped from the
/// effective control set.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTable {
    values: Vec<Option<f64>>,
}

impl ThetaTable {
    pub const DEFAULT_Z_TOL: f64 = 1e-9;

    pub fn compute(spec: &ModelSpec, z_tol: f64) -> Result<Self> {
        let controls = spec.controls();
        let costs: Vec<f64> = controls.iter().map(|&c| spec.effort_cost(c)).collect();
        let z_max = default_z_max(controls, &costs);
        let mut values = Vec::with_capacity(controls.len());
        for idx in 0..controls.len() {
            match theta_by_index(idx, controls, &costs, z_max, z_tol) {
                Ok(s) => values.push(Some(s.value())),
                Err(Error::NoIncentivizingSensitivity { .. }) => values.push(None),
                Err(e) => return Err(e),
            }
        }
        if values.iter().all(Option::is_none) {
            return Err(Error::InvalidModel("no control is incentive compatible".into()));
        }
        Ok(Self { values })
    }

    /// Wraps precomputed values (e.g. read back from an artifact).
    pub fn from_values(values: Vec<Option<f64>>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    #[inline]
    pub fn get(&self, control_idx: usize) -> Option<f64> {
        self.values.get(control_idx).copied().flatten()
    }

    /// Indices of incentivizable controls, ascending.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|_| i))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Multiplies one entry; used to build corrupted tables for negative tests.
    pub fn scaled(&self, control_idx: usize, factor: f64) -> Self {
        let mut values = self.values.clone();
        if let Some(Some(v)) = values.get_mut(control_idx) {
            *v *= factor;
        }
        Self { values }
    }
}

fn default_z_max(controls: &[f64], costs: &[f64]) -> f64 {
    let mut steepest: f64 = 0.0;
    for i in 0..controls.len() {
        for j in (i + 1)..controls.len() {
            steepest = steepest.max(((costs[j] - costs[i]) / (controls[j] - controls[i])).abs());
        }
    }
    2.0 * steepest + 1.0
}
