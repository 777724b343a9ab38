//! Seeded channel generation: uniform placement in the cell, Rayleigh fading
//! and `(1 + d^α)` path loss, normalized by the in-band noise power.
//!
//! The generator is ChaCha20 keyed by `seed_from_u64(master)` with the trial
//! index as stream id, so every `(master, trial)` pair maps to one fixed
//! sequence. Each uniform is `(next_u64 >> 11)·2^-53`. Every user consumes
//! three uniforms in config order: distance, envelope, phase.

use std::f64::consts::PI;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{ChannelRealization, ScenarioConfig, UserSpec};

/// Written into run manifests so a realization can be regenerated elsewhere.
pub const GENERATOR: &str =
    "chacha20 seed_from_u64(master) stream(trial); uniform=(u64>>11)*2^-53; per user: distance, envelope, phase";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub master: u64,
    pub trial: u64,
}

impl Seed {
    pub fn new(master: u64, trial: u64) -> Self {
        Self { master, trial }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master);
        rng.set_stream(self.trial);
        rng
    }
}

/// Uniform on `[0, 1)` with 53 random bits.
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Unit-variance circularly-symmetric complex Gaussian from two uniforms,
/// returned as `(re, im)`.
pub fn complex_gaussian(u_env: f64, u_phase: f64) -> (f64, f64) {
    let r = (-(1.0 - u_env).ln()).sqrt();
    let (s, c) = (2.0 * PI * u_phase).sin_cos();
    (r * c, r * s)
}

/// Noise power `10^((N0 - 30)/10)·B` in watts for a density in dBm/Hz.
pub fn dbm_per_hz_to_watts(n0_dbm: f64, bandwidth: f64) -> f64 {
    10f64.powf((n0_dbm - 30.0) / 10.0) * bandwidth
}

/// Normalized gain `|g|²/((1 + d^α)·σ²)`.
pub fn normalized_gain(envelope_sq: f64, distance: f64, path_loss_exp: f64, noise_power: f64) -> f64 {
    envelope_sq / (1.0 + distance.powf(path_loss_exp)) / noise_power
}

/// A channel draw with users reordered into SIC order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDraw {
    pub channel: ChannelRealization,
    /// User specs in the same order as `channel`.
    pub users: Vec<UserSpec>,
    /// `order[k]` is the config index of the `k`-th sorted user.
    pub order: Vec<usize>,
    /// Distances in sorted order.
    pub distances: Vec<f64>,
}

impl ScenarioDraw {
    /// The config with its users replaced by the sorted ones.
    pub fn apply(&self, config: &ScenarioConfig) -> ScenarioConfig {
        ScenarioConfig {
            users: self.users.clone(),
            ..config.clone()
        }
    }
}

/// Draws one realization for `config`. Users with a fixed `distance` keep it
/// but still consume their distance uniform.
pub fn generate_channels(seed: Seed, config: &ScenarioConfig) -> Result<ScenarioDraw> {
    config.validate()?;
    let mut rng = seed.rng();
    let noise = config.noise_power();
    let mut gains = Vec::with_capacity(config.users.len());
    let mut distances = Vec::with_capacity(config.users.len());
    for u in &config.users {
        let u_d = uniform(&mut rng);
        let u_env = uniform(&mut rng);
        let u_phase = uniform(&mut rng);
        let d = u.distance.unwrap_or(config.cell_radius * (1.0 - u_d));
        let (re, im) = complex_gaussian(u_env, u_phase);
        gains.push(normalized_gain(re * re + im * im, d, config.path_loss_exp, noise));
        distances.push(d);
    }
    let mut draw = sort_users(&gains, &config.users)?;
    draw.distances = draw.order.iter().map(|&i| distances[i]).collect();
    Ok(draw)
}

/// Sorts `(spec, gain)` pairs by ascending gain. The sort is stable, so
/// equal gains keep config order.
pub fn sort_users(gains: &[f64], users: &[UserSpec]) -> Result<ScenarioDraw> {
    if gains.len() != users.len() {
        return Err(crate::Error::LengthMismatch {
            what: "gains",
            got: gains.len(),
            expected: users.len(),
        });
    }
    if let Some(i) = gains.iter().position(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(invalid(format!("gains[{i}]"), "must be finite and > 0"));
    }
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]));
    Ok(ScenarioDraw {
        channel: ChannelRealization::new(order.iter().map(|&i| gains[i]).collect())?,
        users: order.iter().map(|&i| users[i].clone()).collect(),
        order,
        distances: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize) -> ScenarioConfig {
        ScenarioConfig {
            bandwidth: 1e6,
            noise_density_dbm: -174.0,
            users: (0..n)
                .map(|i| UserSpec::new(1e6 + i as f64, 1e3, 1e9, 1e-28))
                .collect(),
            p_max: 0.01,
            e_max: 0.2,
            path_loss_exp: 3.76,
            cell_radius: 500.0,
            server: None,
        }
    }

    #[test]
    fn noise_conversion_examples() {
        let w = dbm_per_hz_to_watts(-174.0, 1e6);
        assert!((w - 10f64.powf(-20.4) * 1e6).abs() <= 1e-14 * w);
        assert!((w - 3.981e-15).abs() < 1e-18);
        assert!((dbm_per_hz_to_watts(-30.0, 1.0) - 1e-6).abs() < 1e-21);
        assert!((dbm_per_hz_to_watts(0.0, 1.0) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = config(5);
        let a = generate_channels(Seed::new(7, 3), &cfg).unwrap();
        let b = generate_channels(Seed::new(7, 3), &cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_channels(Seed::new(7, 4), &cfg).unwrap();
        assert_ne!(a.channel, c.channel);
    }

    #[test]
    fn zero_distance_unit_envelope() {
        let cfg = config(1);
        let g = normalized_gain(1.0, 0.0, cfg.path_loss_exp, cfg.noise_power());
        assert!((g - 1.0 / cfg.noise_power()).abs() <= 1e-12 * g);
    }

    #[test]
    fn fixed_distance_is_kept() {
        let mut cfg = config(3);
        for u in &mut cfg.users {
            u.distance = Some(100.0);
        }
        let draw = generate_channels(Seed::new(1, 0), &cfg).unwrap();
        assert!(draw.distances.iter().all(|&d| d == 100.0));
    }

    #[test]
    fn permutation_keeps_specs_attached() {
        let cfg = config(8);
        let draw = generate_channels(Seed::new(11, 2), &cfg).unwrap();
        for (k, &i) in draw.order.iter().enumerate() {
            assert_eq!(draw.users[k], cfg.users[i]);
        }
        let g = draw.channel.gains();
        assert!(g.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn envelope_has_unit_power() {
        let mut rng = Seed::new(42, 0).rng();
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let (re, im) = complex_gaussian(uniform(&mut rng), uniform(&mut rng));
            acc += re * re + im * im;
        }
        assert!((acc / n as f64 - 1.0).abs() < 0.01);
    }

    #[test]
    fn envelope_matches_rayleigh_cdf() {
        let mut rng = Seed::new(43, 0).rng();
        let n = 100_000;
        let mut r: Vec<f64> = (0..n)
            .map(|_| {
                let (re, im) = complex_gaussian(uniform(&mut rng), uniform(&mut rng));
                re.hypot(im)
            })
            .collect();
        r.sort_by(f64::total_cmp);
        let ks = r
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 1.0 - (-x * x).exp();
                (cdf - i as f64 / n as f64).abs().max((cdf - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "ks={ks}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn output_sorted_and_positive(master in any::<u64>(), trial in 0u64..1000, n in 1usize..9) {
                let draw = generate_channels(Seed::new(master, trial), &config(n)).unwrap();
                let g = draw.channel.gains();
                prop_assert!(g.iter().all(|&x| x > 0.0 && x.is_finite()));
                prop_assert!(g.windows(2).all(|w| w[0] <= w[1]));
                let mut seen = draw.order.clone();
                seen.sort_unstable();
                prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
        }
    }
}
