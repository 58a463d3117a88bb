//! Indirect load control: a utility pays `N` identical customers to let an
//! aggregator run their air conditioners, trading balancing-market revenue
//! against indoor comfort.
//!
//! Units: hours, kW per customer, currency per hour, degrees Celsius.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::AutoGrid;
use crate::model::families::Curve;
use crate::model::ModelSpec;
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LoadControlParams {
    pub n_customers: f64,
    /// Tariff `zeta` per kWh.
    pub tariff: f64,
    /// Balancing price `lambda_t` per kWh.
    pub price_series: TimeSeries,
    pub vol: f64,
    pub band_low: f64,
    pub band_high: f64,
    pub penalty_scale: f64,
    pub penalty_sharpness: f64,
    /// `alpha`, 1/hour.
    pub thermal_coupling: f64,
    /// `kappa`, degrees per kWh.
    pub cooling_rate: f64,
    pub outdoor_series: TimeSeries,
    pub y_init: f64,
    pub participation: f64,
    /// kW per customer.
    pub control_levels: Vec<f64>,
    /// Aggregate payment rate levels.
    pub payment_levels: Vec<f64>,
    pub horizon: f64,
}

/// Closed-form balancing price: a slow morning ramp plus a Gaussian bump.
///
/// `lambda(t) = base + trend t + peak exp(-((t - peak_time) / width)^2)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceCurve {
    pub base: f64,
    pub trend: f64,
    pub peak: f64,
    pub peak_time: f64,
    pub width: f64,
}

impl PriceCurve {
    /// Peak six hours after a 10am start.
    pub const DEFAULT: PriceCurve = PriceCurve {
        base: 0.03,
        trend: 0.00125,
        peak: 0.09,
        peak_time: 6.0,
        width: 1.2,
    };

    pub fn eval(&self, t: f64) -> f64 {
        let z = (t - self.peak_time) / self.width;
        self.base + self.trend * t + self.peak * libm::exp(-z * z)
    }
}

/// Daily outdoor temperature cycle, `mean + amplitude cos(2 pi (t - peak_time) / 24)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutdoorCurve {
    pub mean: f64,
    pub amplitude: f64,
    pub peak_time: f64,
}

impl OutdoorCurve {
    /// Warmest at 3pm for a 10am start.
    pub const DEFAULT: OutdoorCurve = OutdoorCurve {
        mean: 24.0,
        amplitude: 3.0,
        peak_time: 5.0,
    };

    pub fn eval(&self, t: f64) -> f64 {
        self.mean + self.amplitude * libm::cos(2.0 * core::f64::consts::PI * (t - self.peak_time) / 24.0)
    }
}

/// Samples per hour used for the packaged series.
pub const SAMPLES_PER_HOUR: usize = 20;

fn sample_count(horizon: f64) -> usize {
    libm::ceil(horizon * SAMPLES_PER_HOUR as f64).max(1.0) as usize
}

pub fn default_price_series(horizon: f64) -> TimeSeries {
    let c = PriceCurve::DEFAULT;
    TimeSeries::sample(horizon, sample_count(horizon), |t| c.eval(t))
}

pub fn default_outdoor_series(horizon: f64) -> TimeSeries {
    let c = OutdoorCurve::DEFAULT;
    TimeSeries::sample(horizon, sample_count(horizon), |t| c.eval(t))
}

impl Default for LoadControlParams {
    /// 1000 customers from 10am to 6pm with 2 kW units.
    fn default() -> Self {
        let horizon = 8.0;
        Self {
            n_customers: 1000.0,
            tariff: 0.2,
            price_series: default_price_series(horizon),
            vol: 200.0,
            band_low: 18.0,
            band_high: 22.5,
            penalty_scale: 10.0,
            penalty_sharpness: 5.0,
            thermal_coupling: 0.1,
            cooling_rate: 1.0,
            outdoor_series: default_outdoor_series(horizon),
            y_init: 22.5,
            participation: -100.0,
            control_levels: alloc::vec![0.0, 2.0],
            payment_levels: (0..11).map(|k| 0.02 * k as f64).collect(),
            horizon,
        }
    }
}

impl LoadControlParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(self.n_customers >= 1.0) {
            return bad("n_customers must be at least 1");
        }
        let positive = [
            ("tariff", self.tariff),
            ("vol", self.vol),
            ("penalty_scale", self.penalty_scale),
            ("penalty_sharpness", self.penalty_sharpness),
            ("cooling_rate", self.cooling_rate),
            ("thermal_coupling", self.thermal_coupling),
            ("horizon", self.horizon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.band_low < self.y_init && self.y_init <= self.band_high) {
            return bad("need band_low < y_init <= band_high");
        }
        if !self.participation.is_finite() {
            return bad("participation must be finite");
        }
        if !self.price_series.covers(0.0, self.horizon) {
            return bad("price_series does not cover [0, horizon]");
        }
        if !self.outdoor_series.covers(0.0, self.horizon) {
            return bad("outdoor_series does not cover [0, horizon]");
        }
        if self.control_levels.is_empty() || self.payment_levels.is_empty() {
            return bad("control_levels and payment_levels must be non-empty");
        }
        Ok(())
    }

    /// The thermal band penalty as a curve of indoor temperature.
    pub fn penalty(&self) -> Curve {
        Curve::ExponentialBand {
            scale: self.penalty_scale,
            sharpness: self.penalty_sharpness,
            low: self.band_low,
            high: self.band_high,
        }
    }

    /// Grid rule sized for deviation paths, which wander further in `w`
    /// than the recommended ones.
    pub fn auto_grid() -> AutoGrid {
        AutoGrid {
            sd_margin: 6.0,
            ..AutoGrid::default()
        }
    }
}

/// ```text
/// mu(t, a)     = (zeta - lambda_t) N a
/// f(t, y, a)   = alpha (Theta_t - y) - kappa a
/// h(a)         = zeta N a
/// r_P(t, y, p) = -eta1 (exp(eta2 (y - y_hi)) + exp(eta2 (y_lo - y))) - p
/// r_A(p) = p,  g = id,  q = 0
/// ```
pub fn build_model(params: &LoadControlParams) -> Result<ModelSpec> {
    params.validate()?;
    let p = params.clone();
    let n = p.n_customers;
    let zeta = p.tariff;
    let (alpha, kappa) = (p.thermal_coupling, p.cooling_rate);
    let price = p.price_series.clone();
    let outdoor = p.outdoor_series.clone();
    let penalty = p.penalty();
    Ok(ModelSpec::new(p.horizon, p.participation, p.y_init)
        .with_revenue_drift(move |t, a| (zeta - price.eval(t)) * n * a)
        .with_revenue_vol(p.vol)
        .with_system_rhs(move |t, y, a| alpha * (outdoor.eval(t) - y) - kappa * a)
        .with_effort_cost(move |a| zeta * n * a)
        .with_running_reward(move |_, y, pay| -penalty.eval(y) - pay)
        .with_pay_utility(|pay| pay)
        .with_controls(p.control_levels)
        .with_payments(p.payment_levels))
}

/// The packaged instance.
pub fn default_instance() -> (LoadControlParams, ModelSpec) {
    let params = LoadControlParams::default();
    let spec = build_model(&params).expect("default parameters are valid");
    (params, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ThetaTable;

    #[test]
    fn default_instance_evaluates_as_expected() {
        let (_, spec) = default_instance();
        assert_eq!(spec.effort_cost(2.0), 400.0);
        let expected = -20.0 * libm::exp(-11.25);
        assert!((spec.running_reward(0.0, 20.25, 0.0) - expected).abs() < 1e-15);
        assert!((expected + 2.6e-4).abs() < 1e-5);
        assert_eq!(spec.pay_utility(0.13), 0.13);
        assert_eq!(spec.end_pay().inverse(-3.0), -3.0);
        assert_eq!(spec.terminal_reward(21.0), 0.0);
    }

    #[test]
    fn theta_table_of_default_instance() {
        let (_, spec) = default_instance();
        let th = ThetaTable::compute(&spec, ThetaTable::DEFAULT_Z_TOL).unwrap();
        assert_eq!(th.get(0), Some(0.0));
        assert!((th.get(1).unwrap() - 200.0).abs() < 1e-6);
    }

    #[test]
    fn band_penalty_mirrors() {
        let (_, spec) = default_instance();
        for d in [0.0, 0.3, 1.7, 4.0] {
            let hi = spec.running_reward(1.0, 22.5 + d, 0.1);
            let lo = spec.running_reward(1.0, 18.0 - d, 0.1);
            assert!((hi - lo).abs() <= 1e-12 * hi.abs());
        }
    }

    #[test]
    fn price_peaks_at_four_pm_and_stays_below_tariff() {
        let s = default_price_series(8.0);
        let (k, _) = s
            .values()
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
        assert!((s.times()[k] - 6.0).abs() <= 1.0 / SAMPLES_PER_HOUR as f64);
        assert!(s.eval(0.0) < s.eval(6.0));
        assert!(s.values().iter().all(|&v| v >= 0.0 && v < 0.2));
    }

    #[test]
    fn invalid_params_name_the_violation() {
        let mut p = LoadControlParams::default();
        p.y_init = 17.0;
        assert!(matches!(build_model(&p), Err(Error::InvalidParams(m)) if m.contains("y_init")));
        let mut p = LoadControlParams::default();
        p.thermal_coupling = 0.0;
        assert!(matches!(build_model(&p), Err(Error::InvalidParams(m)) if m.contains("thermal_coupling")));
        let mut p = LoadControlParams::default();
        p.price_series = TimeSeries::constant(0.05, 4.0);
        assert!(matches!(build_model(&p), Err(Error::InvalidParams(m)) if m.contains("price_series")));
    }
}
