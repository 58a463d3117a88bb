use dyncon_core::{theta, ModelSpec, ThetaTable, TimeSeries};
use proptest::prelude::*;

fn spec_with_costs(controls: Vec<f64>, costs: Vec<f64>) -> ModelSpec {
    let table: Vec<(f64, f64)> = controls.iter().copied().zip(costs).collect();
    ModelSpec::new(1.0, 0.0, 0.0)
        .with_controls(controls)
        .with_effort_cost(move |a| table.iter().find(|(c, _)| *c == a).map(|(_, h)| *h).unwrap_or(0.0))
}

fn payoff(z: f64, a: f64, spec: &ModelSpec) -> f64 {
    -spec.effort_cost(a) + z * a
}

fn in_argmax(z: f64, a: f64, spec: &ModelSpec) -> bool {
    let own = payoff(z, a, spec);
    spec.controls().iter().all(|&b| payoff(z, b, spec) <= own)
}

/// Sorted distinct controls with non-decreasing costs.
fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    proptest::collection::vec((0.01..3.0f64, 0.0..2.0f64), 1..6).prop_map(|steps| {
        let mut controls = vec![0.0];
        let mut costs = vec![0.0];
        for (da, dh) in steps {
            controls.push(controls.last().unwrap() + da);
            costs.push(costs.last().unwrap() + dh);
        }
        (controls, costs)
    })
}

proptest! {
    #[test]
    fn theta_is_a_minimal_incentivizing_sensitivity((controls, costs) in instance()) {
        let spec = spec_with_costs(controls.clone(), costs);
        let table = ThetaTable::compute(&spec, 1e-9).unwrap();
        for (k, &a) in controls.iter().enumerate() {
            match table.get(k) {
                Some(z) => {
                    prop_assert!(in_argmax(z, a, &spec));
                    if z > 0.0 {
                        prop_assert!(!in_argmax((z - 1e-6).max(0.0), a, &spec));
                    }
                    let direct = theta(a, &spec, table.max() * 2.0 + 1.0, 1e-9).unwrap().value();
                    prop_assert!((direct - z).abs() <= 1e-8);
                }
                None => {
                    // a control off the lower convex hull is never a best response
                    let grid = (0..4000).map(|s| s as f64 * 0.005);
                    for z in grid {
                        prop_assert!(!in_argmax(z, a, &spec));
                    }
                }
            }
        }
        // the smallest control is always free to incentivize
        prop_assert_eq!(table.get(0), Some(0.0));
    }

    #[test]
    fn series_interpolation_stays_between_samples(
        values in proptest::collection::vec(-5.0..5.0f64, 2..10),
        s in 0.0..1.0f64,
    ) {
        let times: Vec<f64> = (0..values.len()).map(|k| k as f64 * 0.5).collect();
        let series = TimeSeries::new(times.clone(), values.clone()).unwrap();
        for (t, v) in times.iter().zip(&values) {
            prop_assert_eq!(series.eval(*t), *v);
        }
        let t = s * times.last().unwrap();
        let k = ((t / 0.5).floor() as usize).min(values.len() - 2);
        let (lo, hi) = (values[k].min(values[k + 1]), values[k].max(values[k + 1]));
        let v = series.eval(t);
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }
}

#[test]
fn brute_force_lattice_agrees_on_a_nonconvex_cost() {
    // costs 0, 1, 1.2, 4 on 0..3: control 1 is dominated by the chord
    let spec = spec_with_costs(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 1.2, 4.0]);
    let table = ThetaTable::compute(&spec, 1e-10).unwrap();
    for (k, &a) in spec.controls().iter().enumerate() {
        let scan = (0..=100_000)
            .map(|s| s as f64 * 1e-4)
            .find(|&z| in_argmax(z, a, &spec));
        match (table.get(k), scan) {
            (Some(z), Some(zs)) => assert!((z - zs).abs() <= 1e-4, "control {a}: {z} vs {zs}"),
            (None, None) => {}
            other => panic!("control {a}: {other:?}"),
        }
    }
    assert_eq!(table.get(1), None);
}
