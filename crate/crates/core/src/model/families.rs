//! Built-in scalar function families, selectable by name from config files.

use crate::model::EndPayUtility;

/// A scalar curve `x -> value`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum Curve {
    Zero,
    Constant {
        value: f64,
    },
    /// `intercept + slope * x`
    Linear {
        #[cfg_attr(feature = "serde", serde(default))]
        intercept: f64,
        slope: f64,
    },
    /// `c0 + c1 * x + c2 * x^2`
    Quadratic {
        #[cfg_attr(feature = "serde", serde(default))]
        c0: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        c1: f64,
        c2: f64,
    },
    /// `scale * (exp(sharpness * (x - high)) + exp(sharpness * (low - x)))`,
    /// a soft penalty for leaving `[low, high]`.
    ExponentialBand {
        scale: f64,
        sharpness: f64,
        low: f64,
        high: f64,
    },
}

impl Default for Curve {
    fn default() -> Self {
        Curve::Zero
    }
}

impl Curve {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Curve::Zero => 0.0,
            Curve::Constant { value } => value,
            Curve::Linear { intercept, slope } => intercept + slope * x,
            Curve::Quadratic { c0, c1, c2 } => c0 + c1 * x + c2 * x * x,
            Curve::ExponentialBand {
                scale,
                sharpness,
                low,
                high,
            } => scale * (libm::exp(sharpness * (x - high)) + libm::exp(sharpness * (low - x))),
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Curve::Zero => true,
            Curve::Constant { value } => value.is_finite(),
            Curve::Linear { intercept, slope } => intercept.is_finite() && slope.is_finite(),
            Curve::Quadratic { c0, c1, c2 } => c0.is_finite() && c1.is_finite() && c2.is_finite(),
            Curve::ExponentialBand {
                scale,
                sharpness,
                low,
                high,
            } => scale.is_finite() && sharpness.is_finite() && low.is_finite() && high.is_finite(),
        }
    }
}

/// Invertible, strictly increasing end-time pay utilities.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum EndPayFamily {
    /// `g(c) = intercept + slope * c`, slope > 0.
    Linear {
        #[cfg_attr(feature = "serde", serde(default))]
        intercept: f64,
        slope: f64,
    },
    /// `g(c) = (1 - exp(-gamma * c)) / gamma`, the CARA utility.
    /// Its inverse is only defined for `w < 1 / gamma`.
    Exponential { risk_aversion: f64 },
}

impl Default for EndPayFamily {
    fn default() -> Self {
        EndPayFamily::Linear {
            intercept: 0.0,
            slope: 1.0,
        }
    }
}

impl EndPayFamily {
    pub fn forward(&self, c: f64) -> f64 {
        match *self {
            EndPayFamily::Linear { intercept, slope } => intercept + slope * c,
            EndPayFamily::Exponential { risk_aversion: g } => -libm::expm1(-g * c) / g,
        }
    }

    pub fn inverse(&self, w: f64) -> f64 {
        match *self {
            EndPayFamily::Linear { intercept, slope } => (w - intercept) / slope,
            EndPayFamily::Exponential { risk_aversion: g } => -libm::log1p(-g * w) / g,
        }
    }

    /// Supremum of the utility range (the inverse blows up there).
    pub fn sup(&self) -> f64 {
        match *self {
            EndPayFamily::Linear { .. } => f64::INFINITY,
            EndPayFamily::Exponential { risk_aversion } => 1.0 / risk_aversion,
        }
    }

    pub fn check(&self) -> Result<(), &'static str> {
        match *self {
            EndPayFamily::Linear { intercept, slope } => {
                if !(slope > 0.0 && slope.is_finite() && intercept.is_finite()) {
                    return Err("linear end-pay utility needs a finite positive slope");
                }
            }
            EndPayFamily::Exponential { risk_aversion } => {
                if !(risk_aversion > 0.0 && risk_aversion.is_finite()) {
                    return Err("exponential end-pay utility needs risk_aversion > 0");
                }
            }
        }
        Ok(())
    }

    pub fn into_utility(self) -> EndPayUtility {
        EndPayUtility::new(move |c| self.forward(c), move |w| self.inverse(w))
    }
}
