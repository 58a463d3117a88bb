//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! cargo test -p dyncon --test acceptance

#[path = "../../core/tests/support/mca.rs"]
mod mca;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dyncon::commands::cmd_example;
use dyncon::config::RunConfig;
use dyncon_core::contract::ensemble_map;
use dyncon_core::hjb::{convergence_report, dyadic_refinements, solve_initial_value};
use dyncon_core::loadcontrol::{default_instance, LoadControlParams};
use dyncon_core::{
    deviation_mc, solve, verify, AutoGrid, Grid, ModelSpec, SolveOptions, Strategy, ThetaTable, ValueField,
    VerifyOptions,
};

const MARTINGALE_PATHS: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct LoadControl {
    params: LoadControlParams,
    spec: ModelSpec,
    field: ValueField,
}

impl LoadControl {
    fn new() -> Self {
        let (params, spec) = default_instance();
        let grid = auto_grid(LoadControlParams::auto_grid(), &spec);
        let field = solve(&spec, &grid).expect("load-control instance solves");
        Self { params, spec, field }
    }

    fn grid(&self) -> &Grid {
        self.field.grid()
    }
}

fn auto_grid(rule: AutoGrid, spec: &ModelSpec) -> Grid {
    let theta = ThetaTable::compute(spec, ThetaTable::DEFAULT_Z_TOL).unwrap();
    rule.build(spec, &theta).unwrap()
}

fn trivial_closed_forms() -> Outcome {
    let start = Instant::now();
    let g = Grid {
        w_min: -3.0,
        w_max: 3.0,
        n_w: 25,
        y_min: -2.0,
        y_max: 2.0,
        n_y: 17,
        horizon: 1.5,
        n_t: 30,
    };
    let zero = ModelSpec::new(1.5, 0.4, 0.0);
    let linear_q = ModelSpec::new(1.5, 0.4, 0.0).with_terminal_reward(|y| y);
    let a = solve(&zero, &g).unwrap();
    let b = solve(&linear_q, &g).unwrap();
    let mut mismatches = 0;
    for n in 0..=g.n_t {
        for i in 0..g.n_w {
            for j in 0..g.n_y {
                mismatches += (a.phi_at(n, i, j) != -g.w(i)) as usize;
                mismatches += (b.phi_at(n, i, j) != g.y(j) - g.w(i)) as usize;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(1),
        format!("{mismatches} inexact nodes, {elapsed:.2?}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let g = mca::grid();
    let spec = mca::spec();
    let ours = solve(&spec, &g).unwrap().initial_value(&spec).unwrap();
    let chain = mca::mca_value(&g);
    let rel = (ours - chain).abs() / chain.abs();
    let elapsed = start.elapsed();
    outcome(
        rel < 0.02 && elapsed < Duration::from_secs(10),
        format!("solver {ours:.7}, chain {chain:.7}, relative difference {rel:.2e}, {elapsed:.2?}"),
    )
}

/// Individual rationality and terminal consistency on the same paths.
fn path_identities(lc: &LoadControl) -> (Outcome, Outcome) {
    let b = lc.spec.participation();
    let rows = ensemble_map(&lc.field, &lc.spec, 2000, lc.grid().n_t, 7, |s| {
        let p = &s.path;
        let w_t = *p.w_star.last().unwrap();
        let err = (lc.spec.end_pay().utility(p.end_pay) - w_t).abs() / (1.0 + w_t.abs());
        (p.w_star[0] == b, err)
    })
    .unwrap();
    let ir_bad = rows.iter().filter(|r| !r.0).count();
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    (
        outcome(ir_bad == 0, format!("{ir_bad} of {} paths start away from b = {b}", rows.len())),
        outcome(
            worst <= 1e-10,
            format!("max |g(C*) - w*_T| / (1 + |w*_T|) = {worst:.2e} over {} paths", rows.len()),
        ),
    )
}

fn martingale_and_value(lc: &LoadControl, gap: f64) -> (Outcome, Outcome) {
    let s = dyncon_core::ensemble(&lc.field, &lc.spec, MARTINGALE_PATHS, lc.grid().n_t, 3).unwrap();
    let b = lc.spec.participation();
    let phi = lc.field.initial_value(&lc.spec).unwrap();
    let m = outcome(
        b == -100.0 && s.agent.within(b, 3.0),
        format!(
            "agent payoff {:.2} +- {:.2} over {} paths, b = {b}",
            s.agent.mean, s.agent.se, s.n_paths
        ),
    );
    let tol = (3.0 * s.principal.se).max(gap);
    let v = outcome(
        (s.principal.mean - phi).abs() <= tol,
        format!(
            "principal payoff {:.2} +- {:.2}, phi = {phi:.2}, tolerance {tol:.2}",
            s.principal.mean, s.principal.se
        ),
    );
    (m, v)
}

fn incentive_compatibility(lc: &LoadControl, gap: f64) -> Outcome {
    let opts = VerifyOptions {
        n_paths: 2000,
        base_seed: 1,
        principal_gap: gap,
        ..VerifyOptions::default()
    };
    let report = verify(&lc.field, &lc.spec, &opts).unwrap();
    let halved = lc.field.clone().with_theta(lc.field.theta().scaled(1, 0.5));
    let negative = verify(
        &halved,
        &lc.spec,
        &VerifyOptions {
            n_paths: 200,
            ..opts.clone()
        },
    )
    .unwrap();
    let b = lc.spec.participation();
    let worst = report
        .strategy_table
        .iter()
        .map(|r| r.payoff.mean - 3.0 * r.payoff.se)
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        report.passed() && !negative.passed(),
        format!(
            "best response {:.6} (b = {b}, tolerance {:.3}), max deviation mean - 3SE {worst:.1}, pointwise {}, \
             halved theta rejected: {}",
            report.best_response_value,
            report.tolerance,
            report.pointwise_violation,
            !negative.passed()
        ),
    )
}

fn monotone_properties(lc: &LoadControl) -> Outcome {
    let g = *lc.grid();
    let phi = &lc.field;
    let mut increases = 0usize;
    for n in 0..=g.n_t {
        for i in 1..g.n_w {
            for j in 0..g.n_y {
                increases += (phi.phi_at(n, i, j) > phi.phi_at(n, i - 1, j)) as usize;
            }
        }
    }

    // raise q by a nonnegative bump and by a constant
    let (params, _) = default_instance();
    let mid = 0.5 * (params.band_low + params.band_high);
    let bumped = dyncon_core::loadcontrol::build_model(&params)
        .unwrap()
        .with_terminal_reward(move |y| (1.0 - (y - mid).abs()).max(0.0));
    let shift = 7.25;
    let shifted = dyncon_core::loadcontrol::build_model(&params)
        .unwrap()
        .with_terminal_reward(move |_| shift);
    let up = solve(&bumped, &g).unwrap();
    let sh = solve(&shifted, &g).unwrap();
    let mut below = 0usize;
    let mut shift_err: f64 = 0.0;
    let mut policy_changes = 0usize;
    for n in 0..=g.n_t {
        for i in 0..g.n_w {
            for j in 0..g.n_y {
                let base = phi.phi_at(n, i, j);
                below += (up.phi_at(n, i, j) < base) as usize;
                shift_err = shift_err.max((sh.phi_at(n, i, j) - base - shift).abs() / (1.0 + base.abs()));
                if n < g.n_t {
                    policy_changes += (sh.policy_index(n, i, j) != phi.policy_index(n, i, j)) as usize;
                }
            }
        }
    }
    // the shift identity holds up to floating-point rounding of the sums
    let shift_ok = shift_err <= 1e-12 * g.n_t as f64 && policy_changes == 0;
    outcome(
        increases == 0 && below == 0 && shift_ok,
        format!(
            "{increases} increases in w, {below} comparison violations, shift residual {shift_err:.1e} \
             (relative), {policy_changes} policy changes under the shift"
        ),
    )
}

fn grid_convergence(spec: &ModelSpec) -> Outcome {
    let start = Instant::now();
    let base = auto_grid(
        AutoGrid {
            n_w: 11,
            n_y: 41,
            ..LoadControlParams::auto_grid()
        },
        spec,
    );
    let grids = dyadic_refinements(spec, &base, 3, SolveOptions::default().c_cfl).unwrap();
    let report = convergence_report(spec, &grids).unwrap();
    let values: Vec<String> = report.rows.iter().map(|(_, v)| format!("{v:.3}")).collect();
    let gaps: Vec<String> = report.gaps().iter().map(|v| format!("{v:.3}")).collect();
    outcome(
        report.is_shrinking(),
        format!(
            "values [{}], gaps [{}], {:.1?}",
            values.join(", "),
            gaps.join(", "),
            start.elapsed()
        ),
    )
}

fn qualitative_example() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::TempDir::new().unwrap();
    let r = match cmd_example(RunConfig::load_control_example(), dir.path()) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("example failed: {e}")),
    };
    let elapsed = start.elapsed();
    let q = &r.summary.qualitative;
    let band = r.summary.band.as_ref().map(|b| b.min_share).unwrap_or(0.0);
    outcome(
        q.precools() && q.off_at_peak() && band >= 0.99 && elapsed < Duration::from_secs(300),
        format!(
            "pre-cooling for at least {:.2} h, cooling share within {} h of the {:.2} h price peak {}, \
             smallest per-path band share {band:.3}, {elapsed:.1?}",
            q.min_precool_hours, q.peak_window, q.price_peak, q.max_on_share_at_peak
        ),
    )
}

/// Distance between the load-control value on its grid and on the grid
/// with half the spatial resolution.
fn principal_gap(lc: &LoadControl) -> f64 {
    let coarse = auto_grid(
        AutoGrid {
            n_w: (lc.grid().n_w - 1) / 2 + 1,
            n_y: (lc.grid().n_y - 1) / 2 + 1,
            ..LoadControlParams::auto_grid()
        },
        &lc.spec,
    );
    let v = solve_initial_value(&lc.spec, &coarse, &SolveOptions::default()).unwrap();
    (v - lc.field.initial_value(&lc.spec).unwrap()).abs()
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("trivial closed forms", trivial_closed_forms()));
    results.push(("oracle equivalence", oracle_equivalence()));

    let lc = LoadControl::new();
    let gap = principal_gap(&lc);
    let (ir, terminal) = path_identities(&lc);
    results.push(("individual rationality", ir));
    results.push(("terminal consistency", terminal));
    let (martingale, value) = martingale_and_value(&lc, gap);
    results.push(("martingale property", martingale));
    results.push(("value consistency", value));
    results.push(("incentive compatibility", incentive_compatibility(&lc, gap)));
    results.push(("monotone scheme properties", monotone_properties(&lc)));
    results.push(("grid convergence", grid_convergence(&lc.spec)));
    results.push(("qualitative load control", qualitative_example()));

    println!("deviation strategies (agent payoff, 500 paths):");
    let family = Strategy::standard_family(lc.spec.controls().len(), lc.params.horizon, 3);
    if let Ok(rows) = deviation_mc(&lc.field, &lc.spec, &family, 500, lc.grid().n_t, 11) {
        for row in rows {
            println!("    {:<28} {:>10.2} +- {:.2}", row.name, row.payoff.mean, row.payoff.se);
        }
    }

    let mut failed = 0;
    for (name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += !o.pass as usize;
        println!("{tag} {name}: {}", o.detail);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
