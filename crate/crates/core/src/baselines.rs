//! Comparison schemes and throughput metrics.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{sum_rate, Allocation, ChannelRealization, ScenarioConfig};
use crate::solver::{bisect, bss_solve, SolverOptions};

/// Default circuit power in watts for the energy-efficiency metric.
pub const DEFAULT_CIRCUIT_POWER: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    NomaPartial,
    NomaFull,
    #[serde(rename = "ofdma-partial-1rb")]
    OfdmaPartial1Rb,
    OfdmaPartialMrb,
    Local,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::NomaPartial,
        Scheme::NomaFull,
        Scheme::OfdmaPartial1Rb,
        Scheme::OfdmaPartialMrb,
        Scheme::Local,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::NomaPartial => "noma-partial",
            Scheme::NomaFull => "noma-full",
            Scheme::OfdmaPartial1Rb => "ofdma-partial-1rb",
            Scheme::OfdmaPartialMrb => "ofdma-partial-mrb",
            Scheme::Local => "local",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| invalid("scheme", format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sum_rate: f64,
    /// Rate over radiated plus circuit power, bits/J.
    pub energy_efficiency: f64,
    /// Rate over radiated power; `None` when nothing is radiated.
    pub power_efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub delay: f64,
    pub sum_rate: f64,
    pub total_power: f64,
    pub energy_efficiency: f64,
    pub power_efficiency: Option<f64>,
    pub allocation: Allocation,
    /// Bisection steps; the largest over users for the OFDMA schemes.
    pub iterations: usize,
}

fn efficiency(rate: f64, power: f64, p_circuit: f64) -> Metrics {
    let total = power + p_circuit;
    Metrics {
        sum_rate: rate,
        energy_efficiency: if total > 0.0 { rate / total } else { 0.0 },
        power_efficiency: (power > 0.0).then(|| rate / power),
    }
}

/// NOMA sum rate and efficiencies of an allocation.
pub fn metrics(
    alloc: &Allocation,
    channel: &ChannelRealization,
    config: &ScenarioConfig,
    p_circuit: f64,
) -> Result<Metrics> {
    if !(p_circuit >= 0.0) {
        return Err(invalid("p_circuit", "must be >= 0"));
    }
    let rate = sum_rate(
        channel.gains(),
        &alloc.powers,
        config.bandwidth,
        channel.len() - 1,
    )?;
    Ok(efficiency(rate, alloc.total_power(), p_circuit))
}

fn result(scheme: Scheme, delay: f64, alloc: Allocation, iterations: usize, m: Metrics) -> SchemeResult {
    SchemeResult {
        scheme,
        delay,
        sum_rate: m.sum_rate,
        total_power: alloc.total_power(),
        energy_efficiency: m.energy_efficiency,
        power_efficiency: m.power_efficiency,
        allocation: alloc,
        iterations,
    }
}

/// Partial offloading over the shared NOMA channel.
pub fn solve_noma_partial(
    channel: &ChannelRealization,
    config: &ScenarioConfig,
    opts: &SolverOptions,
    p_circuit: f64,
) -> Result<SchemeResult> {
    let res = bss_solve(channel, config, opts)?;
    let m = metrics(&res.allocation, channel, config, p_circuit)?;
    Ok(result(Scheme::NomaPartial, res.optimal_delay, res.allocation, res.iterations, m))
}

/// Each user alone on an equal bandwidth slice `rb_count·B/M`, noise scaled
/// with the slice; per-user delays come from single-user bisection.
pub fn solve_ofdma_partial(
    channel: &ChannelRealization,
    config: &ScenarioConfig,
    rb_count: usize,
    opts: &SolverOptions,
    p_circuit: f64,
) -> Result<SchemeResult> {
    config.validate()?;
    let n = config.users.len();
    if rb_count != 1 && rb_count != n {
        return Err(invalid(
            "rb_count",
            format!("must be 1 or the user count {n}, got {rb_count}"),
        ));
    }
    if channel.len() != n {
        return Err(Error::LengthMismatch {
            what: "gains",
            got: channel.len(),
            expected: n,
        });
    }
    let share = rb_count as f64 * config.bandwidth / n as f64;
    let mut betas = Vec::with_capacity(n);
    let mut powers = Vec::with_capacity(n);
    let mut delay = 0.0_f64;
    let mut iterations = 0;
    let mut rate = 0.0;
    for (m, user) in config.users.iter().enumerate() {
        let gain = channel.gains()[m] * config.bandwidth / share;
        let single = ScenarioConfig {
            bandwidth: share,
            users: vec![user.clone()],
            ..config.clone()
        };
        let ch = ChannelRealization::new(vec![gain])?;
        let res = bss_solve(&ch, &single, opts)
            .map_err(|e| Error::Infeasible(format!("ofdma user {m}: {e}")))?;
        delay = delay.max(res.optimal_delay);
        iterations = iterations.max(res.iterations);
        rate += share * (gain * res.allocation.powers[0]).ln_1p() / LN_2;
        betas.push(res.allocation.betas[0]);
        powers.push(res.allocation.powers[0]);
    }
    let scheme = if rb_count == 1 {
        Scheme::OfdmaPartial1Rb
    } else {
        Scheme::OfdmaPartialMrb
    };
    let alloc = Allocation::new(betas, powers);
    let m = efficiency(rate, alloc.total_power(), p_circuit);
    Ok(result(scheme, delay, alloc, iterations, m))
}

/// Powers for full offloading at level `alpha`: every user at the largest
/// power its budget allows, which maximizes every prefix rate.
fn full_offload_powers(alpha: f64, config: &ScenarioConfig) -> Vec<f64> {
    let p = config.p_max.min(config.e_max / alpha);
    vec![p; config.users.len()]
}

fn full_offload_feasible(alpha: f64, channel: &ChannelRealization, config: &ScenarioConfig) -> Option<Vec<f64>> {
    if !(alpha > 0.0) {
        return None;
    }
    let powers = full_offload_powers(alpha, config);
    let mut bits = 0.0;
    for m in 0..config.users.len() {
        bits += config.users[m].task_bits;
        let rate = sum_rate(channel.gains(), &powers, config.bandwidth, m).ok()?;
        if bits > alpha * rate {
            return None;
        }
    }
    Some(powers)
}

/// Whole tasks offloaded over NOMA; only the powers are optimized.
pub fn solve_noma_full_offload(
    channel: &ChannelRealization,
    config: &ScenarioConfig,
    opts: &SolverOptions,
    p_circuit: f64,
) -> Result<SchemeResult> {
    config.validate()?;
    opts.validate()?;
    if channel.len() != config.users.len() {
        return Err(Error::LengthMismatch {
            what: "gains",
            got: channel.len(),
            expected: config.users.len(),
        });
    }
    if config.e_max.is_finite() {
        // as alpha grows the prefix rate tends to B·E·Σγ/ln2
        let mut bits = 0.0;
        let mut gain = 0.0;
        for (m, u) in config.users.iter().enumerate() {
            bits += u.task_bits;
            gain += channel.gains()[m];
            if bits * LN_2 >= config.bandwidth * config.e_max * gain {
                return Err(Error::Infeasible(format!(
                    "full offloading cannot deliver the first {} tasks within the energy budget",
                    m + 1
                )));
            }
        }
    }
    let mut hi = crate::solver::init_bounds(config)?.1;
    let mut top = full_offload_feasible(hi, channel, config);
    for _ in 0..2000 {
        if top.is_some() {
            break;
        }
        hi *= 2.0;
        top = full_offload_feasible(hi, channel, config);
    }
    let top = top.ok_or_else(|| Error::Infeasible("full offloading delay is unbounded".into()))?;
    let run = bisect(0.0, hi, top, opts.eps, |a| Ok(full_offload_feasible(a, channel, config)))?;
    let alloc = Allocation::new(vec![1.0; config.users.len()], run.witness);
    let m = metrics(&alloc, channel, config, p_circuit)?;
    Ok(result(Scheme::NomaFull, run.value, alloc, run.iterations, m))
}

/// Everything computed on the devices.
pub fn full_local_delay(config: &ScenarioConfig, p_circuit: f64) -> Result<SchemeResult> {
    config.validate()?;
    for (m, u) in config.users.iter().enumerate() {
        if u.full_local_energy() > config.e_max {
            return Err(Error::Infeasible(format!(
                "user {m} needs {:.3e} J to compute locally, budget is {:.3e} J",
                u.full_local_energy(),
                config.e_max
            )));
        }
    }
    let delay = crate::solver::init_bounds(config)?.1;
    let alloc = Allocation::local_only(config.users.len());
    Ok(result(Scheme::Local, delay, alloc, 0, efficiency(0.0, 0.0, p_circuit)))
}

/// Runs one scheme by label.
pub fn run_scheme(
    scheme: Scheme,
    channel: &ChannelRealization,
    config: &ScenarioConfig,
    opts: &SolverOptions,
    p_circuit: f64,
) -> Result<SchemeResult> {
    match scheme {
        Scheme::NomaPartial => solve_noma_partial(channel, config, opts, p_circuit),
        Scheme::NomaFull => solve_noma_full_offload(channel, config, opts, p_circuit),
        Scheme::OfdmaPartial1Rb => solve_ofdma_partial(channel, config, 1, opts, p_circuit),
        Scheme::OfdmaPartialMrb => {
            solve_ofdma_partial(channel, config, config.users.len(), opts, p_circuit)
        }
        Scheme::Local => full_local_delay(config, p_circuit),
    }
}
