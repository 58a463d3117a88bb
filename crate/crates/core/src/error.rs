use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid load-control parameters: {0}")]
    InvalidParams(String),

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    /// No sensitivity in `[0, z_max]` puts the control in the agent's argmax.
    #[error("control {control} is never incentive compatible for z in [0, {z_max}]")]
    NoIncentivizingSensitivity { control: f64, z_max: f64 },

    #[error("CFL violation: {detail}")]
    CflViolation { detail: String },

    #[error("non-finite value encountered at time step {step}")]
    NonFiniteValue { step: usize },

    #[error("query ({w}, {y}, t={t}) is outside the grid")]
    OutOfBounds { w: f64, y: f64, t: f64 },

    /// A simulated state left the solved grid; widen the grid bounds.
    #[error("path left the grid at step {step}: w*={w}, y*={y}")]
    GridEscape { step: usize, w: f64, y: f64 },
}
