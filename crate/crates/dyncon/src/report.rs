//! JSON reports and the human-readable verification table.

use std::fmt::Write as _;
use std::path::Path;

use dyncon_core::grid::CflNumbers;
use dyncon_core::{DeviationReport, EnsembleSummary, Grid};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n_w: usize,
    pub n_y: usize,
    pub n_t: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CflReport {
    pub diffusion: f64,
    pub advection: f64,
    pub combined: f64,
}

impl From<CflNumbers> for CflReport {
    fn from(c: CflNumbers) -> Self {
        Self {
            diffusion: c.diffusion,
            advection: c.advection,
            combined: c.combined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    /// `phi(b, y0, 0)`
    pub value: f64,
    pub model_hash: String,
    pub solver: String,
    pub grid: Grid,
    pub theta: Vec<Option<f64>>,
    pub cfl: CflReport,
    /// Coarsest first; the last row is the solved grid.
    pub convergence: Vec<ConvergenceRow>,
    pub gaps: Vec<f64>,
    /// Last successive gap, or `null` with fewer than two rows.
    pub principal_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandOccupancy {
    pub low: f64,
    pub high: f64,
    /// Smallest per-path fraction of samples inside `[low, high]`.
    pub min_share: f64,
    pub mean_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub model_hash: String,
    /// `phi(b, y0, 0)` read off the artifact.
    pub value: f64,
    pub summary: EnsembleSummary,
    /// Mean of `sum pi* dt + C*`.
    pub total_compensation: f64,
    pub band: Option<BandOccupancy>,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}

pub fn deviation_table(r: &DeviationReport) -> String {
    let mut s = String::new();
    let ok = |b: bool| if b { "pass" } else { "FAIL" };
    let _ = writeln!(s, "participation b           {}", r.participation);
    let _ = writeln!(s, "agent best response       {}", r.best_response_value);
    let _ = writeln!(
        s,
        "following the contract    {} +- {}",
        r.recommended_value.mean, r.recommended_value.se
    );
    let _ = writeln!(s, "tolerance                 {}", r.tolerance);
    let _ = writeln!(s, "pointwise violation       {}", r.pointwise_violation);
    let _ = writeln!(s);
    let width = r.strategy_table.iter().map(|row| row.name.len()).max().unwrap_or(8).max(8);
    let _ = writeln!(s, "{:<width$}  {:>16}  {:>12}", "strategy", "mean payoff", "se");
    for row in &r.strategy_table {
        let _ = writeln!(s, "{:<width$}  {:>16.4}  {:>12.4}", row.name, row.payoff.mean, row.payoff.se);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "pointwise IC              {}", ok(r.pointwise_ok));
    let _ = writeln!(s, "best response equals b    {}", ok(r.best_response_ok));
    let _ = writeln!(s, "no profitable deviation   {}", ok(r.no_profitable_deviation));
    let _ = writeln!(s, "table below best response {}", ok(r.table_consistent));
    let _ = writeln!(s, "verdict                   {}", ok(r.passed()));
    s
}
