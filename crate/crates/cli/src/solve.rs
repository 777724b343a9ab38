//! `solve`: one scenario, one method.

use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use nomamec::baselines::{metrics, Scheme};
use nomamec::closed_form::{solve_two_user, solve_two_user_limited, TwoUserParams, TwoUserSolution};
use nomamec::model::{total_delay, Allocation, ChannelRealization, ScenarioConfig};
use nomamec::solver::{bss_solve, SolverOptions};
use serde::Serialize;

use crate::config::{ChannelSpec, ConfigFile};
use crate::output::{self, Manifest, Row};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bss,
    ClosedForm,
    /// Closed form for two users when it is valid, bisection otherwise.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    /// Method that produced the result.
    pub method: Method,
    pub delay: f64,
    pub allocation: Allocation,
    pub sum_rate: f64,
    /// Bisection steps; 0 for the closed form.
    pub iterations: usize,
    pub case_label: Option<String>,
    /// Why `auto` left the closed form.
    pub fallback: Option<String>,
    pub overall_delay: f64,
}

fn from_closed_form(sol: &TwoUserSolution) -> (f64, Allocation, String) {
    (sol.delay, sol.allocation(), sol.case_label.to_string())
}

fn closed_form(channel: &ChannelRealization, config: &ScenarioConfig) -> Result<TwoUserSolution, CliError> {
    if config.users.len() != 2 {
        return Err(CliError::Usage(format!(
            "--method closed-form needs exactly 2 users, the config has {}",
            config.users.len()
        )));
    }
    let params = TwoUserParams::from_scenario(channel, config)?;
    Ok(match &config.server {
        None => solve_two_user(&params)?,
        Some(s) => solve_two_user_limited(&params, s)?,
    })
}

/// Runs `method` on a channel already in SIC order.
pub fn solve(
    channel: &ChannelRealization,
    config: &ScenarioConfig,
    method: Method,
    opts: &SolverOptions,
) -> Result<SolveReport, CliError> {
    let mut fallback = None;
    let cf = match method {
        Method::Bss => None,
        Method::ClosedForm => {
            let sol = closed_form(channel, config)?;
            if !sol.valid {
                return Err(CliError::Infeasible(
                    "the closed-form point violates a constraint of the full problem".into(),
                ));
            }
            Some(sol)
        }
        Method::Auto if config.users.len() == 2 => match closed_form(channel, config) {
            Ok(sol) if sol.valid => Some(sol),
            Ok(_) => {
                fallback = Some("closed-form point violates a constraint".to_string());
                None
            }
            Err(e) => {
                fallback = Some(e.to_string());
                None
            }
        },
        Method::Auto => None,
    };
    let (used, delay, allocation, iterations, case_label) = match cf {
        Some(sol) => {
            let (d, a, c) = from_closed_form(&sol);
            (Method::ClosedForm, d, a, 0, Some(c))
        }
        None => {
            let r = bss_solve(channel, config, opts)?;
            (Method::Bss, r.optimal_delay, r.allocation, r.iterations, None)
        }
    };
    let m = metrics(&allocation, channel, config, 0.0)?;
    let overall = total_delay(&allocation, channel, config)?.overall;
    Ok(SolveReport {
        method: used,
        delay,
        sum_rate: m.sum_rate,
        allocation,
        iterations,
        case_label,
        fallback,
        overall_delay: overall,
    })
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::Bss => "bss",
        Method::ClosedForm => "closed-form",
        Method::Auto => "auto",
    }
}

/// Human-readable summary; users are listed in SIC order.
pub fn render(report: &SolveReport, order: &[usize]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method      {}", method_label(report.method));
    if let Some(why) = &report.fallback {
        let _ = writeln!(s, "fallback    {why}");
    }
    let _ = writeln!(s, "delay       {:.9e} s", report.delay);
    let _ = writeln!(s, "overall     {:.9e} s", report.overall_delay);
    let _ = writeln!(s, "sum rate    {:.9e} bit/s", report.sum_rate);
    let _ = writeln!(s, "iterations  {}", report.iterations);
    if let Some(c) = &report.case_label {
        let _ = writeln!(s, "case        {c}");
    }
    let _ = writeln!(s, "{:>4} {:>6} {:>18} {:>18}", "sic", "user", "beta", "power_w");
    for (k, (b, p)) in report.allocation.betas.iter().zip(&report.allocation.powers).enumerate() {
        let _ = writeln!(s, "{k:>4} {:>6} {b:>18.9e} {p:>18.9e}", order.get(k).copied().unwrap_or(k));
    }
    s
}

#[derive(Debug, Serialize)]
struct SolveParams {
    method: Method,
}

/// Writes `solve.csv` and `solve.manifest.json` into `dir`.
pub fn write(
    dir: &Path,
    file: &ConfigFile,
    report: &SolveReport,
    method: Method,
    opts: &SolverOptions,
) -> Result<(), CliError> {
    output::ensure_dir(dir)?;
    let draw = file.draw()?;
    let config = draw.apply(&file.scenario);
    let m = metrics(&report.allocation, &draw.channel, &config, nomamec::baselines::DEFAULT_CIRCUIT_POWER)?;
    let row = Row {
        axis: "none".into(),
        value: f64::NAN,
        scheme: Scheme::NomaPartial.label().into(),
        seed: file.master_seed(),
        delay: report.delay,
        sum_rate: m.sum_rate,
        total_power: report.allocation.total_power(),
        ee: m.energy_efficiency,
        pe: m.power_efficiency.unwrap_or(f64::NAN),
        iterations: report.iterations,
        case_label: report.case_label.clone().unwrap_or_default(),
    };
    output::write_rows(&dir.join("solve.csv"), &[row])?;
    let seeds = match file.channel {
        ChannelSpec::Seeded { seed, trial } => vec![(seed, trial)],
        ChannelSpec::Gains { .. } => Vec::new(),
    };
    let manifest = Manifest {
        command: "solve",
        version: output::VERSION,
        generator: nomamec::scenario::GENERATOR,
        config: file,
        tolerances: *opts,
        seeds,
        params: SolveParams { method },
        outputs: vec!["solve.csv".into()],
    };
    output::write_json(&dir.join("solve.manifest.json"), &manifest)
}
