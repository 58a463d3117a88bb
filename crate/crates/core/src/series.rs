use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Piecewise-linear time series through strictly increasing sample times.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "SeriesRepr", into = "SeriesRepr"))]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "need matching non-empty columns, got {} times and {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(k) = times.iter().chain(&values).position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite entry at position {k}")));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSeries(format!("times must strictly increase (row {})", k + 1)));
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: f64, horizon: f64) -> Self {
        Self {
            times: alloc::vec![0.0, horizon],
            values: alloc::vec![value, value],
        }
    }

    /// Samples `f` at `n + 1` evenly spaced points over `[0, horizon]`.
    pub fn sample(horizon: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let n = n.max(1);
        // the last point is exactly `horizon`, which `horizon * n / n` need not be
        let times: Vec<f64> = (0..=n)
            .map(|k| if k == n { horizon } else { horizon * k as f64 / n as f64 })
            .collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn covers(&self, start: f64, end: f64) -> bool {
        self.times[0] <= start && *self.times.last().unwrap() >= end
    }

    /// Linear interpolation; constant beyond the end samples.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        // first index with times[k] > t; k in 1..n
        let k = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct SeriesRepr {
    times: Vec<f64>,
    values: Vec<f64>,
}

#[cfg(feature = "serde")]
impl TryFrom<SeriesRepr> for TimeSeries {
    type Error = Error;
    fn try_from(r: SeriesRepr) -> Result<Self> {
        TimeSeries::new(r.times, r.values)
    }
}

#[cfg(feature = "serde")]
impl From<TimeSeries> for SeriesRepr {
    fn from(s: TimeSeries) -> Self {
        SeriesRepr {
            times: s.times,
            values: s.values,
        }
    }
}
