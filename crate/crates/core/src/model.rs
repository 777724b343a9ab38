//! Domain types and the physical formulas for rate, delay and energy.
//!
//! Users are indexed from zero in SIC order: user `0` has the weakest channel
//! and is decoded last, so it sees no interference; user `m` is interfered by
//! every user `j < m`. All quantities are SI (Hz, W, J, s, bits). The only
//! logarithmic unit is the noise density, which is converted at ingestion.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Computation task and local CPU of one mobile user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    /// Input size `L` in bits.
    pub task_bits: f64,
    /// CPU cycles needed per input bit, `C`.
    pub cycles_per_bit: f64,
    /// Local CPU frequency in cycles per second.
    pub cpu_freq: f64,
    /// Effective switched capacitance, J·s²/cycle³.
    pub kappa: f64,
    /// Distance to the base station in meters. When absent the scenario
    /// generator draws one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

impl UserSpec {
    pub fn new(task_bits: f64, cycles_per_bit: f64, cpu_freq: f64, kappa: f64) -> Self {
        Self {
            task_bits,
            cycles_per_bit,
            cpu_freq,
            kappa,
            distance: None,
        }
    }

    /// Time to compute the whole task locally.
    pub fn full_local_time(&self) -> f64 {
        self.task_bits * self.cycles_per_bit / self.cpu_freq
    }

    /// Energy to compute the whole task locally.
    pub fn full_local_energy(&self) -> f64 {
        self.kappa * self.task_bits * self.cycles_per_bit * self.cpu_freq.powi(2)
    }

    /// Local throughput in bits per second, `f / C`.
    pub fn local_throughput(&self) -> f64 {
        self.cpu_freq / self.cycles_per_bit
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        positive(&format!("{path}.task_bits"), self.task_bits)?;
        positive(&format!("{path}.cycles_per_bit"), self.cycles_per_bit)?;
        positive(&format!("{path}.cpu_freq"), self.cpu_freq)?;
        positive(&format!("{path}.kappa"), self.kappa)?;
        if let Some(d) = self.distance {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(invalid(format!("{path}.distance"), "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// CPU of a MEC server with limited computing resources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    pub cycles_per_bit: f64,
    pub cpu_freq: f64,
    pub kappa: f64,
}

impl ServerSpec {
    pub fn validate(&self, path: &str) -> Result<()> {
        positive(&format!("{path}.cycles_per_bit"), self.cycles_per_bit)?;
        positive(&format!("{path}.cpu_freq"), self.cpu_freq)?;
        positive(&format!("{path}.kappa"), self.kappa)
    }
}

/// Physical and task parameterization of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// System bandwidth `B` in Hz.
    pub bandwidth: f64,
    /// Noise power spectral density in dBm/Hz.
    pub noise_density_dbm: f64,
    pub users: Vec<UserSpec>,
    /// Per-user transmit power limit in watts.
    pub p_max: f64,
    /// Per-user energy budget in joules. May be infinite.
    pub e_max: f64,
    pub path_loss_exp: f64,
    pub cell_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server: Option<ServerSpec>,
}

impl ScenarioConfig {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        positive("bandwidth", self.bandwidth)?;
        if !self.noise_density_dbm.is_finite() {
            return Err(invalid("noise_density_dbm", "must be finite"));
        }
        positive("p_max", self.p_max)?;
        if !(self.e_max > 0.0) {
            return Err(invalid("e_max", "must be > 0"));
        }
        positive("path_loss_exp", self.path_loss_exp)?;
        if !(self.cell_radius > 0.0 && self.cell_radius.is_finite()) {
            return Err(invalid("cell_radius", "must be finite and > 0"));
        }
        if self.users.is_empty() {
            return Err(invalid("users", "at least one user is required"));
        }
        for (i, u) in self.users.iter().enumerate() {
            u.validate(&format!("users[{i}]"))?;
        }
        if let Some(s) = &self.server {
            s.validate("server")?;
        }
        Ok(())
    }

    /// Noise power over the full band, `σ² = N0·B`, in watts.
    pub fn noise_power(&self) -> f64 {
        crate::scenario::dbm_per_hz_to_watts(self.noise_density_dbm, self.bandwidth)
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

/// Noise-normalized channel gains `γ_m` (1/W), sorted ascending in SIC order.
///
/// `γ_m·p_m` is the received SNR of user `m` alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    gains: Vec<f64>,
}

impl ChannelRealization {
    /// Wraps gains that are already positive and sorted ascending.
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        check_sorted_gains(&gains)?;
        Ok(Self { gains })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// Returns the first index breaking positivity or ascending order.
pub fn check_sorted_gains(gains: &[f64]) -> Result<()> {
    if gains.is_empty() {
        return Err(invalid("gains", "at least one gain is required"));
    }
    for (i, &g) in gains.iter().enumerate() {
        if !(g > 0.0 && g.is_finite()) || (i > 0 && g < gains[i - 1]) {
            return Err(Error::UnsortedGains { index: i });
        }
    }
    Ok(())
}

/// Offloaded fractions `β` and transmit powers `p`, one entry per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub betas: Vec<f64>,
    pub powers: Vec<f64>,
}

impl Allocation {
    pub fn new(betas: Vec<f64>, powers: Vec<f64>) -> Self {
        Self { betas, powers }
    }

    /// Everything computed locally, radios off.
    pub fn local_only(users: usize) -> Self {
        Self::new(vec![0.0; users], vec![0.0; users])
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn validate(&self, users: usize, p_max: f64) -> Result<()> {
        if self.betas.len() != users {
            return Err(Error::LengthMismatch {
                what: "betas",
                got: self.betas.len(),
                expected: users,
            });
        }
        if self.powers.len() != users {
            return Err(Error::LengthMismatch {
                what: "powers",
                got: self.powers.len(),
                expected: users,
            });
        }
        for (i, &b) in self.betas.iter().enumerate() {
            if !(0.0..=1.0).contains(&b) {
                return Err(invalid(format!("betas[{i}]"), "must lie in [0, 1]"));
            }
        }
        for (i, &p) in self.powers.iter().enumerate() {
            if !(0.0..=p_max).contains(&p) {
                return Err(invalid(format!("powers[{i}]"), "must lie in [0, p_max]"));
            }
        }
        Ok(())
    }
}

/// Per-user timing of an allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    /// Aggregated (prefix) offload time of each user, seconds.
    pub offload: Vec<f64>,
    /// Local computing time of each user, seconds.
    pub local: Vec<f64>,
    /// MEC server computing time when a server is configured.
    pub server: Option<f64>,
    /// Completion time of the slowest path over all users.
    pub overall: f64,
}

fn check_index(m: usize, count: usize) -> Result<()> {
    if m < count {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { index: m, count })
    }
}

fn check_lengths(gains: &[f64], powers: &[f64]) -> Result<()> {
    if gains.len() == powers.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what: "powers",
            got: powers.len(),
            expected: gains.len(),
        })
    }
}

/// Received SNR sum `Σ_{i≤m} γ_i p_i`.
fn received_snr(gains: &[f64], powers: &[f64], m: usize) -> f64 {
    gains[..=m]
        .iter()
        .zip(&powers[..=m])
        .map(|(g, p)| g * p)
        .sum()
}

/// SINR of user `m` after cancelling every stronger user.
pub fn sinr(m: usize, gains: &[f64], powers: &[f64]) -> Result<f64> {
    check_lengths(gains, powers)?;
    check_index(m, gains.len())?;
    let interference = if m == 0 {
        0.0
    } else {
        received_snr(gains, powers, m - 1)
    };
    Ok(gains[m] * powers[m] / (interference + 1.0))
}

/// Achievable rate of user `m` in bits per second.
pub fn user_rate(m: usize, gains: &[f64], powers: &[f64], bandwidth: f64) -> Result<f64> {
    Ok(bandwidth * sinr(m, gains, powers)?.ln_1p() / LN_2)
}

/// Sum rate of users `0..=m`, `B·log2(1 + Σ_{i≤m} γ_i p_i)`.
pub fn sum_rate(gains: &[f64], powers: &[f64], bandwidth: f64, m: usize) -> Result<f64> {
    check_lengths(gains, powers)?;
    check_index(m, gains.len())?;
    Ok(bandwidth * received_snr(gains, powers, m).ln_1p() / LN_2)
}

/// `bits / rate` with the conventions `0/x = 0` and `x/0 = ∞` for `x > 0`.
pub(crate) fn transfer_time(bits: f64, rate: f64) -> f64 {
    if bits <= 0.0 {
        0.0
    } else if rate <= 0.0 {
        f64::INFINITY
    } else {
        bits / rate
    }
}

/// Aggregated offload time of the prefix `0..=m`:
/// `Σ_{i≤m} β_i L_i / (B·log2(1 + Σ_{i≤m} γ_i p_i))`.
///
/// Returns `+∞` when bits are pending and the rate is zero.
pub fn aggregated_offload_time(
    m: usize,
    betas: &[f64],
    gains: &[f64],
    powers: &[f64],
    users: &[UserSpec],
    bandwidth: f64,
) -> Result<f64> {
    check_index(m, users.len())?;
    check_index(m, betas.len())?;
    let bits: f64 = betas[..=m]
        .iter()
        .zip(&users[..=m])
        .map(|(b, u)| b * u.task_bits)
        .sum();
    Ok(transfer_time(bits, sum_rate(gains, powers, bandwidth, m)?))
}

/// Offload time of user `m` over its own SIC rate, `β_m L_m / R_m`.
pub fn user_offload_time(
    m: usize,
    betas: &[f64],
    gains: &[f64],
    powers: &[f64],
    users: &[UserSpec],
    bandwidth: f64,
) -> Result<f64> {
    check_index(m, users.len())?;
    check_index(m, betas.len())?;
    let rate = user_rate(m, gains, powers, bandwidth)?;
    Ok(transfer_time(betas[m] * users[m].task_bits, rate))
}

/// Local computing time, `(1 − β) L C / f`.
pub fn local_time(beta: f64, user: &UserSpec) -> f64 {
    (1.0 - beta) * user.full_local_time()
}

/// Local computing energy, `κ (1 − β) L C f²`.
pub fn local_energy(beta: f64, user: &UserSpec) -> f64 {
    (1.0 - beta) * user.full_local_energy()
}

/// Radio energy of user `m`: aggregated offload time times its power.
pub fn offload_energy(
    m: usize,
    alloc: &Allocation,
    gains: &[f64],
    users: &[UserSpec],
    bandwidth: f64,
) -> Result<f64> {
    let t = aggregated_offload_time(m, &alloc.betas, gains, &alloc.powers, users, bandwidth)?;
    let p = alloc.powers[m];
    Ok(if p == 0.0 { 0.0 } else { t * p })
}

/// Total energy drawn by user `m`, local plus radio.
pub fn user_energy(
    m: usize,
    alloc: &Allocation,
    gains: &[f64],
    users: &[UserSpec],
    bandwidth: f64,
) -> Result<f64> {
    check_index(m, users.len())?;
    Ok(local_energy(alloc.betas[m], &users[m]) + offload_energy(m, alloc, gains, users, bandwidth)?)
}

fn offloaded_bits(betas: &[f64], users: &[UserSpec]) -> f64 {
    betas.iter().zip(users).map(|(b, u)| b * u.task_bits).sum()
}

/// Server computing time for everything offloaded, `Σ β_m L_m C_S / f_S`.
pub fn server_time(betas: &[f64], users: &[UserSpec], server: Option<&ServerSpec>) -> Result<f64> {
    let s = server.ok_or(Error::MissingServer)?;
    Ok(offloaded_bits(betas, users) * s.cycles_per_bit / s.cpu_freq)
}

/// Server computing energy, `κ_S Σ β_m L_m f_S²`. Reported only; no
/// constraint involves it.
pub fn server_energy(
    betas: &[f64],
    users: &[UserSpec],
    server: Option<&ServerSpec>,
) -> Result<f64> {
    let s = server.ok_or(Error::MissingServer)?;
    Ok(s.kappa * offloaded_bits(betas, users) * s.cpu_freq.powi(2))
}

/// Completion time of every path for an allocation.
pub fn total_delay(
    alloc: &Allocation,
    channel: &ChannelRealization,
    config: &ScenarioConfig,
) -> Result<DelayBreakdown> {
    let users = &config.users;
    let n = users.len();
    if channel.len() != n {
        return Err(Error::LengthMismatch {
            what: "gains",
            got: channel.len(),
            expected: n,
        });
    }
    alloc.validate(n, f64::INFINITY)?;
    let gains = channel.gains();
    let server = match &config.server {
        Some(s) => Some(server_time(&alloc.betas, users, Some(s))?),
        None => None,
    };
    let mut offload = Vec::with_capacity(n);
    let mut local = Vec::with_capacity(n);
    let mut overall = 0.0_f64;
    for m in 0..n {
        let t_off =
            aggregated_offload_time(m, &alloc.betas, gains, &alloc.powers, users, config.bandwidth)?;
        let t_loc = local_time(alloc.betas[m], &users[m]);
        let path = t_off + server.unwrap_or(0.0);
        overall = overall.max(path).max(t_loc);
        offload.push(t_off);
        local.push(t_loc);
    }
    Ok(DelayBreakdown {
        offload,
        local,
        server,
        overall,
    })
}
