//! Run configuration (JSON). Every field has a default, so `{}` is a valid
//! config describing the all-zero model on an automatic grid.

use std::path::{Path, PathBuf};

use dyncon_core::loadcontrol::{build_model, LoadControlParams};
use dyncon_core::model::families::{Curve, EndPayFamily};
use dyncon_core::{AutoGrid, Grid, ModelSpec, ThetaTable};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::csvio;
use crate::error::CliError;

pub const OUTPUT_DIR_ENV: &str = "DYNCON_OUTPUT_DIR";
pub const THREADS_ENV: &str = "DYNCON_THREADS";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub solve: SolveConfig,
    pub simulation: SimulationConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelConfig {
    Generic(GenericModel),
    LoadControl(LoadControlConfig),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Generic(GenericModel::default())
    }
}

/// A model assembled from the built-in curve families. State and control
/// (or payment) effects enter additively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenericModel {
    pub horizon: f64,
    pub participation: f64,
    pub y0: f64,
    /// `mu` as a curve in the control.
    pub revenue_drift: Curve,
    pub revenue_vol: f64,
    pub system_rhs: SystemRhs,
    pub running_reward: RunningReward,
    pub terminal_reward: Curve,
    pub pay_utility: Curve,
    pub effort_cost: Curve,
    pub end_pay: EndPayFamily,
    pub controls: Vec<f64>,
    pub payments: Vec<f64>,
}

impl Default for GenericModel {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            participation: 0.0,
            y0: 0.0,
            revenue_drift: Curve::Zero,
            revenue_vol: 0.0,
            system_rhs: SystemRhs::default(),
            running_reward: RunningReward::default(),
            terminal_reward: Curve::Zero,
            pay_utility: Curve::Zero,
            effort_cost: Curve::Zero,
            end_pay: EndPayFamily::default(),
            controls: vec![0.0],
            payments: vec![0.0],
        }
    }
}

/// `f(y, a) = state(y) + control(a)`
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemRhs {
    pub state: Curve,
    pub control: Curve,
}

/// `r_P(y, p) = state(y) + payment(p)`
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunningReward {
    pub state: Curve,
    pub payment: Curve,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadControlConfig {
    pub params: LoadControlParams,
    /// `t,lambda` CSV replacing `params.price_series`.
    pub price_csv: Option<PathBuf>,
    /// `t,theta` CSV replacing `params.outdoor_series`.
    pub outdoor_csv: Option<PathBuf>,
}

/// A model with every external input loaded; hashing this identifies the
/// problem an artifact was solved for.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ResolvedModel {
    Generic(GenericModel),
    LoadControl(LoadControlParams),
}

impl ModelConfig {
    /// Loads referenced CSV files, relative to `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<ResolvedModel, CliError> {
        match self {
            ModelConfig::Generic(g) => Ok(ResolvedModel::Generic(g.clone())),
            ModelConfig::LoadControl(lc) => {
                let mut p = lc.params.clone();
                if let Some(path) = &lc.price_csv {
                    p.price_series = csvio::load_series(&base_dir.join(path), "lambda", p.horizon)?;
                }
                if let Some(path) = &lc.outdoor_csv {
                    p.outdoor_series = csvio::load_series(&base_dir.join(path), "theta", p.horizon)?;
                }
                Ok(ResolvedModel::LoadControl(p))
            }
        }
    }
}

impl ResolvedModel {
    pub fn build(&self) -> Result<ModelSpec, CliError> {
        match self {
            ResolvedModel::Generic(g) => g.build(),
            ResolvedModel::LoadControl(p) => build_model(p).map_err(|e| CliError::Config(e.to_string())),
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("model serializes");
        Sha256::digest(&bytes).into()
    }

    pub fn default_auto_grid(&self) -> AutoGrid {
        match self {
            ResolvedModel::Generic(_) => AutoGrid::default(),
            ResolvedModel::LoadControl(_) => LoadControlParams::auto_grid(),
        }
    }

    pub fn load_control(&self) -> Option<&LoadControlParams> {
        match self {
            ResolvedModel::LoadControl(p) => Some(p),
            ResolvedModel::Generic(_) => None,
        }
    }
}

impl GenericModel {
    pub fn build(&self) -> Result<ModelSpec, CliError> {
        let curves = [
            ("revenue_drift", &self.revenue_drift),
            ("system_rhs.state", &self.system_rhs.state),
            ("system_rhs.control", &self.system_rhs.control),
            ("running_reward.state", &self.running_reward.state),
            ("running_reward.payment", &self.running_reward.payment),
            ("terminal_reward", &self.terminal_reward),
            ("pay_utility", &self.pay_utility),
            ("effort_cost", &self.effort_cost),
        ];
        for (name, c) in curves {
            if !c.is_finite() {
                return Err(CliError::Config(format!("model.{name} has non-finite parameters")));
            }
        }
        self.end_pay
            .check()
            .map_err(|m| CliError::Config(format!("model.end_pay: {m}")))?;
        let g = self.clone();
        let spec = ModelSpec::new(g.horizon, g.participation, g.y0)
            .with_revenue_drift(move |_, a| g.revenue_drift.eval(a))
            .with_revenue_vol(self.revenue_vol)
            .with_system_rhs({
                let f = self.system_rhs.clone();
                move |_, y, a| f.state.eval(y) + f.control.eval(a)
            })
            .with_running_reward({
                let r = self.running_reward.clone();
                move |_, y, p| r.state.eval(y) + r.payment.eval(p)
            })
            .with_terminal_reward({
                let q = self.terminal_reward;
                move |y| q.eval(y)
            })
            .with_pay_utility({
                let r = self.pay_utility;
                move |p| r.eval(p)
            })
            .with_effort_cost({
                let h = self.effort_cost;
                move |a| h.eval(a)
            })
            .with_end_pay(self.end_pay.into_utility())
            .with_controls(self.controls.clone())
            .with_payments(self.payments.clone());
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }
}

/// `"auto"`, `{"auto": {...}}` with overrides, or explicit bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Auto(AutoKeyword),
    AutoWith { auto: AutoGrid },
    Explicit(Grid),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoKeyword {
    Auto,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::Auto(AutoKeyword::Auto)
    }
}

impl GridConfig {
    pub fn build(&self, model: &ResolvedModel, spec: &ModelSpec, theta: &ThetaTable) -> dyncon_core::Result<Grid> {
        match self {
            GridConfig::Auto(_) => model.default_auto_grid().build(spec, theta),
            GridConfig::AutoWith { auto } => auto.build(spec, theta),
            GridConfig::Explicit(g) => Ok(*g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub c_cfl: f64,
    /// Number of 2x coarsenings solved for the convergence report.
    pub coarsenings: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            c_cfl: dyncon_core::grid::DEFAULT_C_CFL,
            coarsenings: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_paths: usize,
    /// Euler steps per path; 0 uses the solver's time steps.
    pub n_steps: usize,
    pub base_seed: u64,
    /// How many of the first paths to write as per-path CSVs.
    pub write_paths: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_paths: 1000,
            n_steps: 0,
            base_seed: 0,
            write_paths: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub base_seed: u64,
    pub switch_times: usize,
    pub rel_floor: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n_paths: 2000,
            n_steps: 0,
            base_seed: 1,
            switch_times: 3,
            rel_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write per-path CSVs.
    pub path_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            path_csv: true,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The output directory, unless overridden by the environment.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output.dir.clone(),
        }
    }

    /// The packaged load-control run.
    pub fn load_control_example() -> Self {
        Self {
            model: ModelConfig::LoadControl(LoadControlConfig::default()),
            simulation: SimulationConfig {
                n_paths: 2000,
                write_paths: 5,
                ..SimulationConfig::default()
            },
            ..Self::default()
        }
    }
}
