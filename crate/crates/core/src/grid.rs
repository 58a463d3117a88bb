//! Rectangular `(w, y, t)` discretization and its stability checks.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, ThetaTable};

/// Largest admissible diffusion number `dt (theta sigma)^2 / dw^2`.
pub const DEFAULT_C_CFL: f64 = 0.5;

/// Uniform grid over `[w_min, w_max] x [y_min, y_max] x [0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    pub w_min: f64,
    pub w_max: f64,
    pub n_w: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub n_y: usize,
    pub horizon: f64,
    pub n_t: usize,
}

impl Grid {
    #[inline]
    pub fn dw(&self) -> f64 {
        (self.w_max - self.w_min) / (self.n_w - 1) as f64
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.n_y - 1) as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_t as f64
    }

    #[inline]
    pub fn w(&self, i: usize) -> f64 {
        if i + 1 == self.n_w {
            self.w_max
        } else {
            self.w_min + i as f64 * self.dw()
        }
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        if j + 1 == self.n_y {
            self.y_max
        } else {
            self.y_min + j as f64 * self.dy()
        }
    }

    /// Start of time step `n`.
    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        if n == self.n_t {
            self.horizon
        } else {
            n as f64 * self.dt()
        }
    }

    /// Coefficient sampling time for step `n` (its midpoint).
    #[inline]
    pub fn t_mid(&self, n: usize) -> f64 {
        (n as f64 + 0.5) * self.dt()
    }

    /// Nodes per time slice.
    #[inline]
    pub fn slice_len(&self) -> usize {
        self.n_w * self.n_y
    }

    #[inline]
    pub fn contains(&self, w: f64, y: f64) -> bool {
        w >= self.w_min && w <= self.w_max && y >= self.y_min && y <= self.y_max
    }

    /// Step index enclosing time `t` (the last step for `t = T`).
    pub fn step_of(&self, t: f64) -> usize {
        let u = t / self.horizon * self.n_t as f64;
        let r = libm::round(u);
        let k = if (u - r).abs() < 1e-9 { r } else { libm::floor(u) };
        (k.max(0.0) as usize).min(self.n_t - 1)
    }

    pub fn check_shape(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InvalidGrid(m));
        if self.n_w < 3 || self.n_y < 3 {
            return bad(format!("need at least 3 nodes per axis, got n_w={}, n_y={}", self.n_w, self.n_y));
        }
        if self.n_t < 1 {
            return bad("need at least one time step".into());
        }
        let finite = [self.w_min, self.w_max, self.y_min, self.y_max, self.horizon]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.w_min < self.w_max) || !(self.y_min < self.y_max) || !(self.horizon > 0.0) {
            return bad(format!("degenerate bounds: {self:?}"));
        }
        Ok(())
    }

    /// Validates the grid against a model: interior participation payoff,
    /// reachable `y` envelope, and the explicit-scheme stability limits.
    pub fn validate(&self, spec: &ModelSpec, theta: &ThetaTable, c_cfl: f64) -> Result<CflNumbers> {
        self.check_shape()?;
        if (self.horizon - spec.horizon()).abs() > 1e-12 * spec.horizon() {
            return Err(Error::InvalidGrid(format!(
                "grid horizon {} differs from model horizon {}",
                self.horizon,
                spec.horizon()
            )));
        }
        let b = spec.participation();
        if !(self.w_min < b && b < self.w_max) {
            return Err(Error::InvalidGrid(format!(
                "participation payoff {b} must lie strictly inside [{}, {}]",
                self.w_min, self.w_max
            )));
        }
        let (lo, hi) = reachable_envelope(spec, 2000);
        if !(self.y_min <= lo && hi <= self.y_max) {
            return Err(Error::InvalidGrid(format!(
                "reachable system states [{lo:.6}, {hi:.6}] escape [{}, {}]",
                self.y_min, self.y_max
            )));
        }
        let cfl = CflNumbers::principal(spec, theta, self);
        cfl.check(c_cfl)?;
        Ok(cfl)
    }
}

/// Stability numbers of the explicit scheme (each already multiplied by `dt`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflNumbers {
    /// `dt max (theta sigma)^2 / dw^2`
    pub diffusion: f64,
    /// `dt max |f| / dy`
    pub advection: f64,
    /// `dt max (|w drift| / dw + (theta sigma)^2 / dw^2 + |f| / dy)`:
    /// the scheme is monotone iff this is at most 1.
    pub combined: f64,
}

impl CflNumbers {
    pub fn principal(spec: &ModelSpec, theta: &ThetaTable, grid: &Grid) -> Self {
        let times: Vec<f64> = (0..grid.n_t).map(|n| grid.t_mid(n)).collect();
        let rates = principal_rates(spec, theta, grid, &times);
        rates.scaled(grid.dt())
    }

    pub fn check(&self, c_cfl: f64) -> Result<()> {
        if !(self.diffusion <= c_cfl) {
            return Err(Error::CflViolation {
                detail: format!("diffusion number {:.4} exceeds {c_cfl}", self.diffusion),
            });
        }
        if !(self.advection <= 1.0) {
            return Err(Error::CflViolation {
                detail: format!("system advection number {:.4} exceeds 1", self.advection),
            });
        }
        if !(self.combined <= 1.0) {
            return Err(Error::CflViolation {
                detail: format!("combined monotonicity number {:.4} exceeds 1", self.combined),
            });
        }
        Ok(())
    }

    fn scaled(self, dt: f64) -> Self {
        Self {
            diffusion: self.diffusion * dt,
            advection: self.advection * dt,
            combined: self.combined * dt,
        }
    }
}

/// Per-unit-time stability rates sampled at `times`.
fn principal_rates(spec: &ModelSpec, theta: &ThetaTable, grid: &Grid, times: &[f64]) -> CflNumbers {
    let (dw, dy) = (grid.dw(), grid.dy());
    let sigma = spec.revenue_vol();
    let pay: Vec<f64> = spec.payments().iter().map(|&p| spec.pay_utility(p)).collect();
    let mut out = CflNumbers {
        diffusion: 0.0,
        advection: 0.0,
        combined: 0.0,
    };
    for u in theta.active() {
        let a = spec.controls()[u];
        let th = theta.get(u).unwrap_or(0.0);
        let diff = (th * sigma) * (th * sigma) / (dw * dw);
        let h = spec.effort_cost(a);
        let w_rate = pay.iter().map(|&r| (h - r).abs()).fold(0.0, f64::max) / dw;
        let mut f_rate: f64 = 0.0;
        for &t in times {
            for j in 0..grid.n_y {
                f_rate = f_rate.max(spec.system_rhs(t, grid.y(j), a).abs() / dy);
            }
        }
        out.diffusion = out.diffusion.max(diff);
        out.advection = out.advection.max(f_rate);
        out.combined = out.combined.max(w_rate + diff + f_rate);
    }
    out
}

/// Smallest and largest system state reachable from `y0` over `[0, T]`,
/// by integrating the extreme-control envelopes with `substeps` Euler steps.
pub fn reachable_envelope(spec: &ModelSpec, substeps: usize) -> (f64, f64) {
    let h = spec.horizon() / substeps as f64;
    let (mut lo, mut hi) = (spec.y0(), spec.y0());
    let (mut min_seen, mut max_seen) = (lo, hi);
    for k in 0..substeps {
        let t = k as f64 * h;
        let down = spec
            .controls()
            .iter()
            .map(|&a| spec.system_rhs(t, lo, a))
            .fold(f64::INFINITY, f64::min);
        let up = spec
            .controls()
            .iter()
            .map(|&a| spec.system_rhs(t, hi, a))
            .fold(f64::NEG_INFINITY, f64::max);
        lo += h * down;
        hi += h * up;
        min_seen = min_seen.min(lo);
        max_seen = max_seen.max(hi);
    }
    (min_seen, max_seen)
}

/// Rules for deriving a grid from a model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct AutoGrid {
    pub n_w: usize,
    pub n_y: usize,
    /// Standard deviations of `w` excursion covered on each side of `b`.
    pub sd_margin: f64,
    /// Padding added around the reachable `y` envelope.
    pub y_pad: f64,
    pub c_cfl: f64,
    /// Fraction of the stability limit used when choosing `n_t`.
    pub cfl_safety: f64,
    pub min_steps: usize,
}

impl Default for AutoGrid {
    fn default() -> Self {
        Self {
            n_w: 41,
            n_y: 81,
            sd_margin: 3.0,
            y_pad: 0.5,
            c_cfl: DEFAULT_C_CFL,
            cfl_safety: 0.9,
            min_steps: 10,
        }
    }
}

impl AutoGrid {
    /// `w` bounds `b -/+ (sd_margin theta_max sigma sqrt(T) + T max|r_A - h|)`.
    pub fn w_bounds(&self, spec: &ModelSpec, theta: &ThetaTable) -> (f64, f64) {
        let t = spec.horizon();
        let spread = self.sd_margin * theta.max() * spec.revenue_vol() * libm::sqrt(t);
        let mut drift: f64 = 0.0;
        for u in theta.active() {
            let h = spec.effort_cost(spec.controls()[u]);
            for &p in spec.payments() {
                drift = drift.max((spec.pay_utility(p) - h).abs());
            }
        }
        let half = (spread + t * drift).max(1.0);
        let b = spec.participation();
        (b - half, b + half)
    }

    pub fn y_bounds(&self, spec: &ModelSpec) -> (f64, f64) {
        let (lo, hi) = reachable_envelope(spec, 2000);
        (lo - self.y_pad, hi + self.y_pad)
    }

    /// Builds a grid with the requested bounds and the fewest time steps
    /// that satisfy the stability limits with `cfl_safety` headroom.
    pub fn with_bounds(&self, spec: &ModelSpec, theta: &ThetaTable, w: (f64, f64), y: (f64, f64)) -> Result<Grid> {
        let mut grid = Grid {
            w_min: w.0,
            w_max: w.1,
            n_w: self.n_w,
            y_min: y.0,
            y_max: y.1,
            n_y: self.n_y,
            horizon: spec.horizon(),
            n_t: 1,
        };
        grid.check_shape()?;
        let samples = 256;
        let times: Vec<f64> = (0..=samples)
            .map(|k| k as f64 * spec.horizon() / samples as f64)
            .collect();
        let r = principal_rates(spec, theta, &grid, &times);
        let rate = r.combined.max(r.advection).max(r.diffusion / self.c_cfl);
        let steps = libm::ceil(spec.horizon() * rate / self.cfl_safety);
        grid.n_t = (steps as usize).max(self.min_steps).max(1);
        // the sampled rate is an estimate; tighten until the exact check passes
        for _ in 0..64 {
            match grid.validate(spec, theta, self.c_cfl) {
                Ok(_) => return Ok(grid),
                Err(Error::CflViolation { .. }) => grid.n_t = grid.n_t + grid.n_t / 10 + 1,
                Err(e) => return Err(e),
            }
        }
        grid.validate(spec, theta, self.c_cfl).map(|_| grid)
    }

    pub fn build(&self, spec: &ModelSpec, theta: &ThetaTable) -> Result<Grid> {
        self.with_bounds(spec, theta, self.w_bounds(spec, theta), self.y_bounds(spec))
    }
}
