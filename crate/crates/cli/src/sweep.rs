//! `sweep`: one parameter axis, several schemes, several channel draws.

use std::path::Path;

use clap::ValueEnum;
use nomamec::baselines::{metrics, run_scheme, Scheme};
use nomamec::model::ScenarioConfig;
use nomamec::scenario::{generate_channels, sort_users, ScenarioDraw, Seed};
use nomamec::solver::SolverOptions;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ChannelSpec, ConfigFile};
use crate::output::{self, Manifest, Row};
use crate::solve::{solve, Method};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    #[value(name = "task_bits")]
    TaskBits,
    #[value(name = "p_max")]
    PMax,
    #[value(name = "e_max")]
    EMax,
    /// Users are taken cyclically from the config list.
    #[value(name = "user_count")]
    UserCount,
    #[value(name = "bandwidth")]
    Bandwidth,
}

impl Axis {
    pub fn label(&self) -> &'static str {
        match self {
            Axis::TaskBits => "task_bits",
            Axis::PMax => "p_max",
            Axis::EMax => "e_max",
            Axis::UserCount => "user_count",
            Axis::Bandwidth => "bandwidth",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(&self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, CliError> {
        let mut cfg = base.clone();
        match self {
            Axis::TaskBits => cfg.users.iter_mut().for_each(|u| u.task_bits = value),
            Axis::PMax => cfg.p_max = value,
            Axis::EMax => cfg.e_max = value,
            Axis::Bandwidth => cfg.bandwidth = value,
            Axis::UserCount => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= 1e6) {
                    return Err(CliError::Usage(format!("user_count value {value} is not a positive integer")));
                }
                cfg.users = base.users.iter().cycle().take(value as usize).cloned().collect();
            }
        }
        cfg.validate()
            .map_err(|e| CliError::Usage(format!("{} = {value}: {e}", self.label())))?;
        Ok(cfg)
    }
}

/// Whether each axis value sees the same channel draw or a fresh one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    Fixed,
    Redraw,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub seeds: usize,
    pub channels: ChannelMode,
    pub p_circuit: f64,
    /// Solver for the NOMA partial scheme.
    pub method: Method,
}

impl SweepSpec {
    fn validate(&self, file: &ConfigFile) -> Result<(), CliError> {
        if self.values.is_empty() || self.schemes.is_empty() || self.seeds == 0 {
            return Err(CliError::Usage("need at least one value, scheme and seed".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Usage(format!("axis value {v} is not finite")));
        }
        if !(self.p_circuit >= 0.0 && self.p_circuit.is_finite()) {
            return Err(CliError::Usage("--p-circuit must be finite and >= 0".into()));
        }
        if let ChannelSpec::Gains { .. } = file.channel {
            if self.seeds != 1 {
                return Err(CliError::Usage("a config with fixed gains allows --seeds 1 only".into()));
            }
            if self.axis == Axis::UserCount {
                return Err(CliError::Usage("user_count needs a seeded channel".into()));
            }
        }
        Ok(())
    }

    /// Trial index for seed `s` at value index `v`.
    fn trial(&self, base: u64, s: usize, v: usize) -> u64 {
        match self.channels {
            ChannelMode::Fixed => base + s as u64,
            ChannelMode::Redraw => base + (s * self.values.len() + v) as u64,
        }
    }

    /// Every `(master, trial)` the sweep draws, in order.
    pub fn seeds_used(&self, file: &ConfigFile) -> Vec<(u64, u64)> {
        let ChannelSpec::Seeded { seed, trial } = file.channel else {
            return Vec::new();
        };
        let mut out: Vec<(u64, u64)> = (0..self.seeds)
            .flat_map(|s| (0..self.values.len()).map(move |v| (s, v)))
            .map(|(s, v)| (seed, self.trial(trial, s, v)))
            .collect();
        out.dedup();
        out
    }
}

fn draw_for(file: &ConfigFile, spec: &SweepSpec, cfg: &ScenarioConfig, s: usize, v: usize) -> Result<ScenarioDraw, CliError> {
    match &file.channel {
        ChannelSpec::Seeded { seed, trial } => {
            Ok(generate_channels(Seed::new(*seed, spec.trial(*trial, s, v)), cfg)?)
        }
        ChannelSpec::Gains { gains } => {
            // Gains are normalized by the noise in the file's band.
            let scale = file.scenario.bandwidth / cfg.bandwidth;
            let g: Vec<f64> = gains.iter().map(|g| g * scale).collect();
            Ok(sort_users(&g, &cfg.users)?)
        }
    }
}

fn infeasible_row(spec: &SweepSpec, value: f64, scheme: Scheme, seed: usize) -> Row {
    Row {
        axis: spec.axis.label().into(),
        value,
        scheme: scheme.label().into(),
        seed: seed as u64,
        delay: f64::NAN,
        sum_rate: f64::NAN,
        total_power: f64::NAN,
        ee: f64::NAN,
        pe: f64::NAN,
        iterations: 0,
        case_label: "infeasible".into(),
    }
}

fn run_one(
    spec: &SweepSpec,
    draw: &ScenarioDraw,
    cfg: &ScenarioConfig,
    value: f64,
    scheme: Scheme,
    seed: usize,
    opts: &SolverOptions,
) -> Result<Row, CliError> {
    let row = |delay, alloc: &nomamec::Allocation, iterations, case_label: String| -> Result<Row, CliError> {
        let m = metrics(alloc, &draw.channel, cfg, spec.p_circuit)?;
        Ok(Row {
            axis: spec.axis.label().into(),
            value,
            scheme: scheme.label().into(),
            seed: seed as u64,
            delay,
            sum_rate: m.sum_rate,
            total_power: alloc.total_power(),
            ee: m.energy_efficiency,
            pe: m.power_efficiency.unwrap_or(f64::NAN),
            iterations,
            case_label,
        })
    };
    if scheme == Scheme::NomaPartial {
        return match solve(&draw.channel, cfg, spec.method, opts) {
            Ok(r) => row(r.delay, &r.allocation, r.iterations, r.case_label.unwrap_or_default()),
            Err(CliError::Infeasible(_)) => Ok(infeasible_row(spec, value, scheme, seed)),
            Err(e) => Err(e),
        };
    }
    match run_scheme(scheme, &draw.channel, cfg, opts, spec.p_circuit) {
        Ok(r) => {
            // OFDMA rates are per sub-band; report them, not the NOMA rate.
            let mut out = row(r.delay, &r.allocation, r.iterations, String::new())?;
            out.sum_rate = r.sum_rate;
            out.ee = r.energy_efficiency;
            out.pe = r.power_efficiency.unwrap_or(f64::NAN);
            Ok(out)
        }
        Err(nomamec::Error::Infeasible(_)) => Ok(infeasible_row(spec, value, scheme, seed)),
        Err(e) => Err(e.into()),
    }
}

/// All rows, ordered by value, then scheme (in `spec` order), then seed.
pub fn run(file: &ConfigFile, spec: &SweepSpec, opts: &SolverOptions) -> Result<Vec<Row>, CliError> {
    spec.validate(file)?;
    opts.validate()?;
    if spec.method == Method::ClosedForm
        && spec.schemes.contains(&Scheme::NomaPartial)
        && spec.axis != Axis::UserCount
        && file.scenario.users.len() != 2
    {
        return Err(CliError::Usage("--method closed-form needs exactly 2 users".into()));
    }
    let configs = spec
        .values
        .iter()
        .map(|&v| spec.axis.apply(&file.scenario, v))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.seeds).map(move |s| (v, s)))
        .collect();
    let mut rows: Vec<((usize, usize, usize), Row)> = jobs
        .par_iter()
        .map(|&(v, s)| -> Result<Vec<_>, CliError> {
            let draw = draw_for(file, spec, &configs[v], s, v)?;
            let cfg = draw.apply(&configs[v]);
            spec.schemes
                .iter()
                .enumerate()
                .map(|(k, &scheme)| {
                    Ok(((v, k, s), run_one(spec, &draw, &cfg, spec.values[v], scheme, s, opts)?))
                })
                .collect()
        })
        .collect::<Result<Vec<Vec<_>>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by_key(|(k, _)| *k);
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Writes the rows, the per-value means and the manifest into `dir`, and
/// returns the file names.
pub fn write(
    dir: &Path,
    file: &ConfigFile,
    spec: &SweepSpec,
    opts: &SolverOptions,
    rows: &[Row],
) -> Result<Vec<String>, CliError> {
    output::ensure_dir(dir)?;
    let stem = format!("sweep_{}", spec.axis.label());
    let names = vec![format!("{stem}.csv"), format!("{stem}_summary.csv")];
    output::write_rows(&dir.join(&names[0]), rows)?;
    output::write_summary(&dir.join(&names[1]), rows)?;
    let manifest = Manifest {
        command: "sweep",
        version: output::VERSION,
        generator: nomamec::scenario::GENERATOR,
        config: file,
        tolerances: *opts,
        seeds: spec.seeds_used(file),
        params: spec,
        outputs: names.clone(),
    };
    let manifest_name = format!("{stem}.manifest.json");
    output::write_json(&dir.join(&manifest_name), &manifest)?;
    let mut all = names;
    all.push(manifest_name);
    Ok(all)
}
