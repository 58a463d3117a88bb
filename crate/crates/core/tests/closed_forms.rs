use dyncon_core::hjb::policy_at;
use dyncon_core::{solve, Grid, ModelSpec};

fn grid() -> Grid {
    Grid {
        w_min: -3.0,
        w_max: 3.0,
        n_w: 25,
        y_min: -2.0,
        y_max: 2.0,
        n_y: 17,
        horizon: 1.5,
        n_t: 30,
    }
}

#[test]
fn all_zero_model_is_minus_w_everywhere() {
    let spec = ModelSpec::new(1.5, 0.4, 0.0);
    let g = grid();
    let field = solve(&spec, &g).unwrap();
    for n in 0..=g.n_t {
        for i in 0..g.n_w {
            for j in 0..g.n_y {
                assert_eq!(field.phi_at(n, i, j), -g.w(i));
            }
        }
    }
}

#[test]
fn linear_terminal_reward_without_dynamics_is_y_minus_w() {
    let spec = ModelSpec::new(1.5, 0.4, 0.0).with_terminal_reward(|y| y);
    let g = grid();
    let field = solve(&spec, &g).unwrap();
    for n in 0..=g.n_t {
        for i in 0..g.n_w {
            for j in 0..g.n_y {
                assert_eq!(field.phi_at(n, i, j), -g.w(i) + g.y(j));
            }
        }
    }
}

#[test]
fn trivial_policy_is_the_only_choice() {
    let spec = ModelSpec::new(1.5, 0.4, 0.0);
    let field = solve(&spec, &grid()).unwrap();
    let opt = policy_at(&field, &spec, 0.13, -0.7, 0.9).unwrap();
    assert_eq!((opt.u_star, opt.pi_star), (0.0, 0.0));
}
