//! The four pipeline stages. Each writes its outputs under an output
//! directory and returns what it computed, so callers decide how to report.

use std::path::{Path, PathBuf};

use dyncon_core::contract::ensemble_map;
use dyncon_core::grid::CflNumbers;
use dyncon_core::hjb::solve_initial_value;
use dyncon_core::{
    ensemble, solve_with, synthesize_path, verify, ContractPath, DeviationReport, Grid, ModelSpec, PathSeed,
    SolveOptions, ThetaTable, TimeSeries, ValueField, VerifyOptions,
};
use serde::Serialize;

use crate::artifact::{hex, Artifact};
use crate::config::{ResolvedModel, RunConfig};
use crate::csvio;
use crate::error::CliError;
use crate::report::{self, BandOccupancy, ConvergenceRow, SimulateReport, SolveReport};

pub const FIELD_FILE: &str = "field.bin";

/// A config with its model resolved and built.
pub struct Context {
    pub config: RunConfig,
    pub model: ResolvedModel,
    pub spec: ModelSpec,
    pub hash: [u8; 32],
}

impl Context {
    /// Relative CSV paths in the config are resolved against `base_dir`.
    pub fn new(config: RunConfig, base_dir: &Path) -> Result<Self, CliError> {
        let model = config.model.resolve(base_dir)?;
        let spec = model.build()?;
        let hash = model.hash();
        Ok(Self {
            config,
            model,
            spec,
            hash,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let config = RunConfig::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::new(config, base)
    }

    fn n_steps(&self, requested: usize, grid: &Grid) -> usize {
        if requested == 0 {
            grid.n_t
        } else {
            requested
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// Half the resolution in every direction, if the grid divides evenly.
fn coarsen(g: &Grid) -> Option<Grid> {
    let even = (g.n_w - 1) % 2 == 0 && (g.n_y - 1) % 2 == 0 && g.n_t % 2 == 0;
    (even && g.n_w >= 5 && g.n_y >= 5 && g.n_t >= 2).then(|| Grid {
        n_w: (g.n_w - 1) / 2 + 1,
        n_y: (g.n_y - 1) / 2 + 1,
        n_t: g.n_t / 2,
        ..*g
    })
}

pub struct SolveOutcome {
    pub field: ValueField,
    pub report: SolveReport,
    pub artifact_path: PathBuf,
}

pub fn cmd_solve(ctx: &Context, out_dir: &Path) -> Result<SolveOutcome, CliError> {
    let spec = &ctx.spec;
    let theta = ThetaTable::compute(spec, ThetaTable::DEFAULT_Z_TOL)?;
    let grid = ctx.config.grid.build(&ctx.model, spec, &theta)?;
    let opts = SolveOptions {
        c_cfl: ctx.config.solve.c_cfl,
        theta: Some(theta.clone()),
        ..SolveOptions::default()
    };
    let field = solve_with(spec, &grid, &opts)?;
    let value = field.initial_value(spec)?;

    let mut coarse = Vec::new();
    let mut g = grid;
    for _ in 0..ctx.config.solve.coarsenings {
        match coarsen(&g) {
            Some(c) if c.validate(spec, &theta, opts.c_cfl).is_ok() => {
                coarse.push(c);
                g = c;
            }
            _ => break,
        }
    }
    let mut convergence = Vec::new();
    for c in coarse.iter().rev() {
        convergence.push(ConvergenceRow {
            n_w: c.n_w,
            n_y: c.n_y,
            n_t: c.n_t,
            value: solve_initial_value(spec, c, &opts)?,
        });
    }
    convergence.push(ConvergenceRow {
        n_w: grid.n_w,
        n_y: grid.n_y,
        n_t: grid.n_t,
        value,
    });
    let gaps: Vec<f64> = convergence.windows(2).map(|w| (w[1].value - w[0].value).abs()).collect();
    let principal_gap = gaps.last().copied();

    let report = SolveReport {
        value,
        model_hash: hex(&ctx.hash),
        solver: crate::artifact::SOLVER_VERSION.to_string(),
        grid,
        theta: theta.values().to_vec(),
        cfl: CflNumbers::principal(spec, &theta, &grid).into(),
        convergence,
        gaps,
        principal_gap,
    };
    ensure_dir(out_dir)?;
    let artifact_path = out_dir.join(FIELD_FILE);
    Artifact::new(ctx.hash, principal_gap.unwrap_or(f64::NAN), field.clone()).save(&artifact_path)?;
    report::write_json(&out_dir.join("solve_report.json"), &report)?;
    Ok(SolveOutcome {
        field,
        report,
        artifact_path,
    })
}

/// Loads an artifact and checks it belongs to the context's model.
pub fn load_artifact(ctx: &Context, path: &Path) -> Result<Artifact, CliError> {
    let a = Artifact::load(path)?;
    a.check_hash(&ctx.hash)?;
    Ok(a)
}

fn band_share(ys: &[f64], low: f64, high: f64) -> f64 {
    ys.iter().filter(|&&y| y >= low && y <= high).count() as f64 / ys.len() as f64
}

pub struct SimulateOutcome {
    pub report: SimulateReport,
    /// The first `write_paths` paths.
    pub paths: Vec<ContractPath>,
}

pub fn cmd_simulate(ctx: &Context, artifact: &Artifact, out_dir: &Path) -> Result<SimulateOutcome, CliError> {
    let spec = &ctx.spec;
    let field = &artifact.field;
    let sim = &ctx.config.simulation;
    let n_steps = ctx.n_steps(sim.n_steps, field.grid());
    let summary = ensemble(field, spec, sim.n_paths, n_steps, sim.base_seed)?;

    let band_limits = ctx
        .model
        .load_control()
        .map(|p| (p.band_low - 0.5, p.band_high + 0.5));
    let per_path = ensemble_map(field, spec, sim.n_paths, n_steps, sim.base_seed, |s| {
        let p = &s.path;
        let dt = spec.horizon() / p.n_steps() as f64;
        let paid = p.pi_star.iter().sum::<f64>() * dt + p.end_pay;
        let share = band_limits.map(|(lo, hi)| band_share(&p.y_star, lo, hi));
        (paid, share)
    })?;
    let total_compensation = per_path.iter().map(|r| r.0).sum::<f64>() / per_path.len() as f64;
    let band = band_limits.map(|(low, high)| {
        let shares: Vec<f64> = per_path.iter().filter_map(|r| r.1).collect();
        BandOccupancy {
            low,
            high,
            min_share: shares.iter().copied().fold(1.0, f64::min),
            mean_share: shares.iter().sum::<f64>() / shares.len() as f64,
        }
    });

    let mut paths = Vec::new();
    for k in 0..sim.write_paths.min(sim.n_paths) {
        paths.push(synthesize_path(field, spec, PathSeed::new(sim.base_seed, k as u64), n_steps)?);
    }

    let report = SimulateReport {
        model_hash: hex(&ctx.hash),
        value: field.initial_value(spec)?,
        summary,
        total_compensation,
        band,
    };
    ensure_dir(out_dir)?;
    report::write_json(&out_dir.join("ensemble.json"), &report)?;
    if ctx.config.output.path_csv {
        for (k, p) in paths.iter().enumerate() {
            let path = out_dir.join(format!("path_{k:04}.csv"));
            let mut buf = Vec::new();
            csvio::write_path(&mut buf, p).map_err(CliError::io(&path))?;
            std::fs::write(&path, buf).map_err(CliError::io(&path))?;
        }
    }
    Ok(SimulateOutcome { report, paths })
}

pub fn verify_options(ctx: &Context, artifact: &Artifact) -> VerifyOptions {
    let v = &ctx.config.verify;
    VerifyOptions {
        n_paths: v.n_paths,
        n_steps: v.n_steps,
        base_seed: v.base_seed,
        switch_times: v.switch_times,
        principal_gap: if artifact.principal_gap.is_finite() {
            artifact.principal_gap
        } else {
            0.0
        },
        rel_floor: v.rel_floor,
    }
}

/// Writes the report whether or not it passes; the caller checks
/// [`DeviationReport::passed`].
pub fn cmd_verify(ctx: &Context, artifact: &Artifact, out_dir: &Path) -> Result<DeviationReport, CliError> {
    let report = verify(&artifact.field, &ctx.spec, &verify_options(ctx, artifact))?;
    ensure_dir(out_dir)?;
    report::write_json(&out_dir.join("verify_report.json"), &report)?;
    let table = report::deviation_table(&report);
    let path = out_dir.join("verify_report.txt");
    std::fs::write(&path, table).map_err(CliError::io(&path))?;
    Ok(report)
}

/// Behavioural properties of the example's recommended paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Qualitative {
    /// Shortest initial run of full cooling over the sampled paths (hours).
    pub min_precool_hours: f64,
    /// Time of the price maximum.
    pub price_peak: f64,
    /// Half-width of the window around the peak that is checked.
    pub peak_window: f64,
    /// Largest fraction of steps with cooling on inside the window.
    pub max_on_share_at_peak: f64,
}

impl Qualitative {
    pub fn precools(&self) -> bool {
        self.min_precool_hours > 0.0
    }

    pub fn off_at_peak(&self) -> bool {
        self.max_on_share_at_peak == 0.0
    }
}

pub fn qualitative(paths: &[ContractPath], u_max: f64, price: &TimeSeries, peak_window: f64) -> Qualitative {
    let (k_peak, _) = price
        .values()
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    let price_peak = price.times()[k_peak];
    let mut min_precool = f64::INFINITY;
    let mut max_share: f64 = 0.0;
    for p in paths {
        let run = p.u_star.iter().take_while(|&&u| u == u_max).count();
        min_precool = min_precool.min(p.times[run]);
        let (mut on, mut total) = (0usize, 0usize);
        for (k, &u) in p.u_star.iter().enumerate() {
            if (p.times[k] - price_peak).abs() <= peak_window {
                total += 1;
                on += (u == u_max) as usize;
            }
        }
        if total > 0 {
            max_share = max_share.max(on as f64 / total as f64);
        }
    }
    Qualitative {
        min_precool_hours: if paths.is_empty() { 0.0 } else { min_precool },
        price_peak,
        peak_window,
        max_on_share_at_peak: max_share,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleSummary {
    pub value: f64,
    pub principal_gap: Option<f64>,
    pub agent_payoff_mean: f64,
    pub agent_payoff_se: f64,
    pub participation: f64,
    pub total_compensation: f64,
    pub band: Option<BandOccupancy>,
    pub qualitative: Qualitative,
    pub verify_passed: bool,
}

pub struct ExampleOutcome {
    pub solve: SolveOutcome,
    pub simulate: SimulateOutcome,
    pub verify: DeviationReport,
    pub summary: ExampleSummary,
}

/// Runs solve, simulate and verify on the packaged load-control instance
/// and writes plot-ready CSVs.
pub fn cmd_example(config: RunConfig, out_dir: &Path) -> Result<ExampleOutcome, CliError> {
    let ctx = Context::new(config, Path::new("."))?;
    let params = ctx
        .model
        .load_control()
        .cloned()
        .ok_or_else(|| CliError::Config("the example needs a load_control model".into()))?;
    let solve = cmd_solve(&ctx, out_dir)?;
    let artifact = load_artifact(&ctx, &solve.artifact_path)?;
    let simulate = cmd_simulate(&ctx, &artifact, out_dir)?;
    let verify = cmd_verify(&ctx, &artifact, out_dir)?;

    let paths = &simulate.paths;
    if let Some(first) = paths.first() {
        let times = &first.times;
        let names: Vec<String> = (0..paths.len()).map(|k| format!("path_{k}")).collect();
        let state = |f: &dyn Fn(&ContractPath) -> &Vec<f64>| -> Vec<Vec<Option<f64>>> {
            paths.iter().map(|p| f(p).iter().map(|&v| Some(v)).collect()).collect()
        };
        let files: [(&str, Vec<Vec<Option<f64>>>); 4] = [
            ("temperature.csv", state(&|p| &p.y_star)),
            ("continuation.csv", state(&|p| &p.w_star)),
            ("control.csv", state(&|p| &p.u_star)),
            ("compensation.csv", state(&|p| &p.pi_star)),
        ];
        for (name, cols) in files {
            write_file(&out_dir.join(name), |w| csvio::write_columns(w, times, &names, &cols))?;
        }
        let price = TimeSeries::new(times.clone(), times.iter().map(|&t| params.price_series.eval(t)).collect())?;
        write_file(&out_dir.join("price.csv"), |w| csvio::write_series(w, "lambda", &price))?;
        let outdoor = TimeSeries::new(times.clone(), times.iter().map(|&t| params.outdoor_series.eval(t)).collect())?;
        write_file(&out_dir.join("outdoor.csv"), |w| csvio::write_series(w, "theta", &outdoor))?;
    }

    let u_max = params.control_levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let summary = ExampleSummary {
        value: solve.report.value,
        principal_gap: solve.report.principal_gap,
        agent_payoff_mean: simulate.report.summary.agent.mean,
        agent_payoff_se: simulate.report.summary.agent.se,
        participation: params.participation,
        total_compensation: simulate.report.total_compensation,
        band: simulate.report.band.clone(),
        qualitative: qualitative(paths, u_max, &params.price_series, 0.5),
        verify_passed: verify.passed(),
    };
    report::write_json(&out_dir.join("example_summary.json"), &summary)?;
    Ok(ExampleOutcome {
        solve,
        simulate,
        verify,
        summary,
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(CliError::io(path))?;
    std::fs::write(path, buf).map_err(CliError::io(path))
}
