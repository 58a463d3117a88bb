use dyncon_core::contract::ensemble_map;
use dyncon_core::model::families::EndPayFamily;
use dyncon_core::{ensemble, simulate_path, solve, synthesize_path, Grid, ModelSpec, PathSeed, ValueField};

fn setup() -> (ModelSpec, ValueField) {
    let spec = ModelSpec::new(1.0, -0.2, 0.3)
        .with_controls(vec![0.0, 1.0])
        .with_payments(vec![0.0, 0.3])
        .with_effort_cost(|a| 0.4 * a)
        .with_revenue_drift(|_, a| 1.5 * a)
        .with_revenue_vol(0.4)
        .with_system_rhs(|_, y, a| 0.5 * a - 0.3 * y)
        .with_running_reward(|_, y, p| -p - 0.2 * y * y)
        .with_pay_utility(|p| 0.8 * p)
        .with_end_pay(EndPayFamily::Exponential { risk_aversion: 0.5 }.into_utility());
    let grid = Grid {
        w_min: -1.6,
        w_max: 1.2,
        n_w: 29,
        y_min: -0.5,
        y_max: 1.5,
        n_y: 21,
        horizon: 1.0,
        n_t: 80,
    };
    let field = solve(&spec, &grid).unwrap();
    (spec, field)
}

#[test]
fn every_path_starts_at_participation_and_closes_its_books() {
    let (spec, field) = setup();
    let checks = ensemble_map(&field, &spec, 500, 160, 11, |s| {
        let p = &s.path;
        let w_t = *p.w_star.last().unwrap();
        (
            p.w_star[0] == spec.participation(),
            (spec.end_pay().utility(p.end_pay) - w_t).abs() <= 1e-10 * (1.0 + w_t.abs()),
        )
    })
    .unwrap();
    assert!(checks.iter().all(|c| c.0), "w*_0 differs from b");
    assert!(checks.iter().all(|c| c.1), "g(C*) differs from w*_T");
}

#[test]
fn paths_are_reproducible_and_seed_dependent() {
    let (spec, field) = setup();
    let a = synthesize_path(&field, &spec, PathSeed::new(5, 2), 80).unwrap();
    let b = synthesize_path(&field, &spec, PathSeed::new(5, 2), 80).unwrap();
    let c = synthesize_path(&field, &spec, PathSeed::new(5, 3), 80).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.x, c.x);
    assert_eq!(a.times.len(), 81);
    assert_eq!(*a.times.last().unwrap(), 1.0);
}

#[test]
fn ensemble_does_not_depend_on_thread_count() {
    let (spec, field) = setup();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ensemble(&field, &spec, 300, 80, 3).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn ensemble_path_k_is_stream_k() {
    let (spec, field) = setup();
    let payoffs = ensemble_map(&field, &spec, 4, 80, 21, |s| s.agent_payoff).unwrap();
    for (k, v) in payoffs.iter().enumerate() {
        let single = simulate_path(&field, &spec, PathSeed::new(21, k as u64), 80).unwrap();
        assert_eq!(single.agent_payoff, *v);
    }
}

#[test]
fn agent_payoff_is_a_martingale_around_b() {
    let (spec, field) = setup();
    let s = ensemble(&field, &spec, 4000, 80, 8).unwrap();
    assert!(s.agent.within(spec.participation(), 3.0), "{:?}", s.agent);
}

#[test]
fn principal_payoff_matches_the_value_function() {
    let (spec, field) = setup();
    let s = ensemble(&field, &spec, 4000, 160, 9).unwrap();
    let phi = field.initial_value(&spec).unwrap();
    // discretization of the coarse grid dominates the Monte Carlo error
    let tol = (3.0 * s.principal.se).max(0.05 * (1.0 + phi.abs()));
    assert!((s.principal.mean - phi).abs() <= tol, "{:?} vs {phi}", s.principal);
}
