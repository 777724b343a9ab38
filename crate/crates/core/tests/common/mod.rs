//! Reference solutions built without the bisection solver.

#![allow(dead_code)]

use nomamec::model::{ChannelRealization, ScenarioConfig, UserSpec};
use nomamec::scenario::{generate_channels, Seed};

/// Reference two-user setting: 1.6 Mbit tasks, 1000 cycles/bit, 1 GHz,
/// heterogeneous `κ`, 10 mW, 0.2 J.
pub fn reference_config() -> ScenarioConfig {
    ScenarioConfig {
        bandwidth: 1e6,
        noise_density_dbm: -174.0,
        users: vec![
            UserSpec::new(1.6e6, 1e3, 1e9, 1e-27),
            UserSpec::new(1.6e6, 1e3, 1e9, 1e-28),
        ],
        p_max: 0.01,
        e_max: 0.2,
        path_loss_exp: 3.76,
        cell_radius: 500.0,
        server: None,
    }
}

pub const REFERENCE_MASTER: u64 = 2024;

/// Sorted draw `(master, trial)` of `config`.
pub fn draw(config: &ScenarioConfig, master: u64, trial: u64) -> (ChannelRealization, ScenarioConfig) {
    let d = generate_channels(Seed::new(master, trial), config).unwrap();
    let c = d.apply(config);
    (d.channel, c)
}

/// Exact single-user optimum at fixed power `p`: the offload share that
/// equalizes local and offload time, moved into the energy-feasible
/// interval. `None` when no share meets the budget.
pub fn single_user_at_power(user: &UserSpec, gamma: f64, bandwidth: f64, p: f64, e_max: f64) -> Option<f64> {
    let rate = bandwidth * (gamma * p).ln_1p() / std::f64::consts::LN_2;
    let t_loc = user.full_local_time();
    let t_off = if rate > 0.0 { user.task_bits / rate } else { f64::INFINITY };
    // Energy is affine in β: e(β) = (1−β) E_loc + β p t_off.
    let e_loc = user.full_local_energy();
    let e_off = if rate > 0.0 { p * t_off } else { 0.0 };
    let (lo, hi) = {
        let slope = e_off - e_loc;
        if slope.abs() < 1e-300 {
            if e_loc <= e_max { (0.0, 1.0) } else { return None }
        } else {
            let root = (e_max - e_loc) / slope;
            if slope > 0.0 { (0.0, root.min(1.0)) } else { (root.max(0.0), 1.0) }
        }
    };
    if lo > hi {
        return None;
    }
    if rate <= 0.0 {
        return (lo == 0.0).then_some(t_loc);
    }
    let equal = t_loc / (t_off + t_loc);
    let beta = equal.clamp(lo, hi);
    Some((beta * t_off).max((1.0 - beta) * t_loc))
}

/// Single-user optimum by scanning `cells + 1` powers in `[0, p_max]`.
pub fn single_user_oracle(user: &UserSpec, gamma: f64, bandwidth: f64, p_max: f64, e_max: f64, cells: usize) -> Option<f64> {
    (0..=cells)
        .filter_map(|k| single_user_at_power(user, gamma, bandwidth, p_max * k as f64 / cells as f64, e_max))
        .min_by(f64::total_cmp)
}

/// Root of an increasing `f` on `[lo, hi]` by plain bisection.
pub fn bisect_root(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
