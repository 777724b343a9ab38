mod common;

use common::*;
use nomamec::baselines::solve_ofdma_partial;
use nomamec::closed_form::{solve_two_user, tight_power, TwoUserParams};
use nomamec::model::{ChannelRealization, ScenarioConfig, UserSpec};
use nomamec::oracle::grid_oracle;
use nomamec::solver::{bss_solve, SolverOptions};

fn opts(eps: f64) -> SolverOptions {
    SolverOptions { eps, ..SolverOptions::default() }
}

#[test]
fn single_user_matches_power_scan() {
    let user = UserSpec::new(1.6e6, 1e3, 1e9, 1e-28);
    for (gamma, e_max) in [(1e7, 0.2), (1e5, 0.2), (1e9, 0.05), (3e4, 0.17), (1e8, f64::INFINITY)] {
        let config = ScenarioConfig {
            users: vec![user.clone()],
            e_max,
            ..reference_config()
        };
        let ch = ChannelRealization::new(vec![gamma]).unwrap();
        let Some(oracle) = single_user_oracle(&user, gamma, 1e6, 0.01, e_max, 20_000) else {
            assert!(bss_solve(&ch, &config, &opts(1e-7)).is_err());
            continue;
        };
        let got = bss_solve(&ch, &config, &opts(1e-7)).unwrap().optimal_delay;
        // The scan can only overestimate; its step effect is below 1e-5 s here.
        assert!(got <= oracle + 1e-6, "γ={gamma}: {got} vs {oracle}");
        assert!(oracle - got <= 1e-5, "γ={gamma}: {got} vs {oracle}");
        let ofdma = solve_ofdma_partial(&ch, &config, 1, &opts(1e-7), 0.1).unwrap();
        assert!((ofdma.delay - got).abs() <= 2e-7, "γ={gamma}");
    }
}

#[test]
fn unlimited_energy_single_user_is_closed() {
    let user = UserSpec::new(1.6e6, 1e3, 1e9, 1e-27);
    let config = ScenarioConfig {
        users: vec![user.clone()],
        e_max: f64::INFINITY,
        ..reference_config()
    };
    let gamma = 4e6;
    let ch = ChannelRealization::new(vec![gamma]).unwrap();
    let rate = 1e6 * (gamma * 0.01f64).ln_1p() / std::f64::consts::LN_2;
    let exact = user.task_bits / (rate + user.local_throughput());
    let got = bss_solve(&ch, &config, &opts(1e-9)).unwrap().optimal_delay;
    // Bracket width plus the accepted residual of 1e-8 relative.
    assert!((got - exact).abs() <= 1e-9 + 1e-8 * exact, "{got} vs {exact}");
}

#[test]
fn tight_roots_match_bisection() {
    for (a, b, g, k) in [(-1.5, 0.8, 3.0, 1.2), (-2.0, 1e-3, 1e6, 1.0), (-0.3, 2.0, 5.0, 1.0)] {
        let r = tight_power(a, b, g, k).unwrap();
        let h = |p: f64| (k + g * p).log2() - a - b * p;
        // h is concave with its peak between the two roots.
        let peak = 1.0 / (b * std::f64::consts::LN_2) - k / g;
        let lower = bisect_root(-k / g + 1e-300, peak, h);
        let upper = bisect_root(peak, peak + 1e6 / b, |p| -h(p));
        assert!((r.lower - lower).abs() <= 1e-9 * lower.abs().max(1.0), "{a} {b}");
        assert!((r.upper - upper).abs() <= 1e-9 * upper.abs().max(1.0), "{a} {b}");
    }
}

fn grid_case(channel: &ChannelRealization, config: &ScenarioConfig) {
    let params = TwoUserParams::from_scenario(channel, config).unwrap();
    let oracle = grid_oracle(&params, 400).unwrap().expect("admissible grid point");
    let eps = 1e-6;
    let tol = 2.0 * (oracle.cell_effect + eps);
    let bss = bss_solve(channel, config, &opts(eps)).unwrap().optimal_delay;
    let cf = solve_two_user(&params).unwrap();
    assert!(cf.valid);
    assert!((bss - oracle.delay).abs() <= tol, "bss {bss} oracle {} tol {tol}", oracle.delay);
    assert!((cf.delay - oracle.delay).abs() <= tol, "cf {} oracle {} tol {tol}", cf.delay, oracle.delay);
}

#[test]
fn reference_draw_matches_grid() {
    let (ch, cfg) = draw(&reference_config(), REFERENCE_MASTER, 0);
    grid_case(&ch, &cfg);
}

#[test]
fn hand_picked_gains_match_grid() {
    let cfg = reference_config();
    for gains in [[1e8, 1e8], [2e7, 5e9], [3e6, 4e6]] {
        let ch = ChannelRealization::new(gains.to_vec()).unwrap();
        let params = TwoUserParams::from_scenario(&ch, &cfg).unwrap();
        if solve_two_user(&params).is_ok_and(|s| s.valid) {
            grid_case(&ch, &cfg);
        }
    }
}
