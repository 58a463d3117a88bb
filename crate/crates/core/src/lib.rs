//! Dynamic principal-agent contracts over a controlled system.
//!
//! The principal observes a revenue process whose drift depends on the
//! agent's hidden control, pays the agent through running payments and an
//! end-time lump sum, and receives a reward that depends on the state of a
//! system the agent's control moves. The crate solves the principal's
//! reformulated control problem on a grid, synthesizes contract paths from
//! the resulting feedback maps, and checks incentive compatibility.
//!
//! Builds without `std` (with `alloc`); the default `std` feature adds
//! parallel sweeps and Monte Carlo.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod contract;
pub mod error;
pub mod grid;
pub mod hjb;
pub mod ic;
pub mod loadcontrol;
pub mod model;
pub mod rng;
pub mod series;

pub use contract::{ensemble, simulate_path, synthesize_path, ContractPath, EnsembleSummary, Estimate, SimulatedPath};
pub use error::{Error, Result};
pub use grid::{AutoGrid, CflNumbers, Grid};
pub use ic::{agent_best_response, deviation_mc, pointwise_ic_check, verify, DeviationReport, Strategy, VerifyOptions};
pub use hjb::{policy_at, solve, solve_with, PolicyLookup, SolveOptions, ValueField};
pub use model::{theta, EndPayUtility, ModelSpec, Sensitivity, ThetaTable};
pub use rng::PathSeed;
pub use series::TimeSeries;
