//! `verify`: runs the invariant checks on one scenario.

use std::fmt;

use nomamec::baselines::{full_local_delay, solve_noma_full_offload};
use nomamec::closed_form::{per_user_times, solve_two_user, TwoUserParams};
use nomamec::lambert::{lambert_w0, BRANCH_POINT};
use nomamec::model::{
    aggregated_offload_time, local_time, sum_rate, user_rate, Allocation, ChannelRealization, ScenarioConfig,
};
use nomamec::oracle::grid_oracle;
use nomamec::solver::{bss_solve, check_feasibility, expected_iterations, init_bounds, SolveResult, SolverOptions};

use crate::config::ConfigFile;
use crate::CliError;

pub const TELESCOPING_TOL: f64 = 1e-9;
pub const LAMBERT_TOL: f64 = 1e-12;
pub const AGREEMENT_TOL: f64 = 1e-3;
pub const EQUAL_TIME_TOL: f64 = 1e-6;
pub const PER_USER_TOL: f64 = 1e-3;
pub const ORACLE_CELLS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
    /// Reported but never fails the run.
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
            Status::Info => "INFO",
        };
        write!(f, "{tag} {:<24} {}", self.name, self.detail)
    }
}

fn check(name: &'static str, ok: bool, detail: String) -> Check {
    Check {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn skip(name: &'static str, why: &str) -> Check {
    Check {
        name,
        status: Status::Skip,
        detail: why.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Largest relative gap between the per-user rate sums and the prefix sum
/// rates at `powers`.
pub fn telescoping_error(gains: &[f64], powers: &[f64], bandwidth: f64) -> Result<f64, CliError> {
    let mut acc = 0.0;
    let mut worst: f64 = 0.0;
    for m in 0..gains.len() {
        acc += user_rate(m, gains, powers, bandwidth)?;
        let total = sum_rate(gains, powers, bandwidth, m)?;
        if total > 0.0 {
            worst = worst.max(rel(acc, total));
        } else {
            worst = worst.max(acc.abs());
        }
    }
    Ok(worst)
}

/// Largest `|W0(x) e^{W0(x)} − x| / max(1, |x|)` over `n` points, log-spaced
/// in `x + 1/e` from `1e-12` to `hi + 1/e`.
pub fn lambert_identity_error(n: usize, hi: f64) -> Result<f64, CliError> {
    let (a, b) = (1e-12f64.ln(), (hi - BRANCH_POINT).ln());
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let s = (a + (b - a) * k as f64 / (n - 1).max(1) as f64).exp();
        let x = BRANCH_POINT + s;
        let w = lambert_w0(x)?;
        worst = worst.max((w * w.exp() - x).abs() / x.abs().max(1.0));
    }
    Ok(worst)
}

fn sorted_check(file: &ConfigFile) -> Check {
    match file.unsorted_gains() {
        Some(i) => check(
            "sorted_gains",
            false,
            format!("channel.gains[{i}] is smaller than its predecessor; SIC order needs ascending gains"),
        ),
        None => check("sorted_gains", true, "gains ascending".into()),
    }
}

fn bss_checks(
    res: &SolveResult,
    channel: &ChannelRealization,
    config: &ScenarioConfig,
    opts: &SolverOptions,
) -> Result<Vec<Check>, CliError> {
    let (lo, hi) = init_bounds(config)?;
    let expected = expected_iterations(hi - lo, opts.eps);
    // Replay the trace: every probe is the midpoint of the current bracket.
    let (mut a, mut b) = (lo, hi);
    let mut halving = true;
    for step in &res.trace {
        halving &= step.alpha == 0.5 * (a + b);
        if step.feasible {
            b = step.alpha;
        } else {
            a = step.alpha;
        }
    }
    halving &= (a, b) == res.bracket && b - a <= opts.eps;
    let valid = res.allocation.validate(config.users.len(), config.p_max).is_ok();
    let mut out = vec![check(
        "bss_certificate",
        res.feasibility_residual <= opts.eps_feas && valid && res.converged,
        format!(
            "delay {:.9e} s, residual {:.2e}, {} inconclusive test(s)",
            res.optimal_delay, res.feasibility_residual, res.inconclusive_checks
        ),
    )];
    out.push(check(
        "bss_iterations",
        res.iterations == expected && halving,
        format!("{} iterations, expected {expected}", res.iterations),
    ));
    // Feasibility must hold above the optimum and fail below the bracket.
    let mut bad = Vec::new();
    for f in [1.001, 1.01, 1.1, 2.0] {
        let a = (res.optimal_delay * f).min(hi);
        if !check_feasibility(a, channel, config, opts)?.feasible {
            bad.push(format!("infeasible at {a:.6e}"));
        }
    }
    for a in [res.bracket.0, 0.5 * res.bracket.0] {
        if a > 0.0 && check_feasibility(a, channel, config, opts)?.feasible {
            bad.push(format!("feasible at {a:.6e}"));
        }
    }
    out.push(check(
        "monotone_feasibility",
        bad.is_empty(),
        if bad.is_empty() { "feasible above, infeasible below".into() } else { bad.join("; ") },
    ));
    let mut refs = Vec::new();
    match solve_noma_full_offload(channel, config, opts, 0.0) {
        Ok(r) => refs.push(("full offload", r.delay)),
        Err(nomamec::Error::Infeasible(_)) => {}
        Err(e) => return Err(e.into()),
    }
    match full_local_delay(config, 0.0) {
        Ok(r) => refs.push(("local", r.delay)),
        Err(nomamec::Error::Infeasible(_)) => {}
        Err(e) => return Err(e.into()),
    }
    let beaten: Vec<String> = refs
        .iter()
        .filter(|(_, d)| res.optimal_delay > d + opts.eps)
        .map(|(n, d)| format!("{n} {d:.6e}"))
        .collect();
    out.push(check(
        "dominance",
        beaten.is_empty(),
        if beaten.is_empty() {
            format!("partial below {} reference scheme(s)", refs.len())
        } else {
            format!("partial {:.6e} above {}", res.optimal_delay, beaten.join(", "))
        },
    ));
    Ok(out)
}

fn two_user_checks(
    bss: &SolveResult,
    channel: &ChannelRealization,
    config: &ScenarioConfig,
    opts: &SolverOptions,
) -> Result<Vec<Check>, CliError> {
    let params = TwoUserParams::from_scenario(channel, config)?;
    let mut out = Vec::new();
    let cf = match solve_two_user(&params) {
        Ok(s) if s.valid => Some(s),
        Ok(_) | Err(nomamec::Error::ClosedFormUnavailable(_)) => None,
        Err(e) => return Err(e.into()),
    };
    match grid_oracle(&params, ORACLE_CELLS)? {
        None => out.push(skip("grid_oracle", "no admissible equal-time grid point")),
        Some(o) => {
            let tol = 2.0 * (o.cell_effect + opts.eps);
            let bss_ok = bss.optimal_delay <= o.delay + tol;
            let cf_ok = cf.as_ref().is_none_or(|s| (s.delay - o.delay).abs() <= tol);
            out.push(check(
                "grid_oracle",
                bss_ok && cf_ok,
                format!(
                    "oracle {:.9e} s, tolerance {tol:.2e}, bisection {:.9e} s{}",
                    o.delay,
                    bss.optimal_delay,
                    cf.as_ref().map(|s| format!(", closed form {:.9e} s", s.delay)).unwrap_or_default()
                ),
            ));
        }
    }
    let Some(sol) = cf else {
        out.push(skip("closed_form_agreement", "closed-form point not valid for this scenario"));
        out.push(skip("equal_time", "no valid closed-form point"));
        return Ok(out);
    };
    // With a binding energy budget the bisection may beat the equal-time
    // structure, never the other way round.
    let tol = (AGREEMENT_TOL * sol.delay).max(opts.eps);
    let gap = bss.optimal_delay - sol.delay;
    let ok = if sol.case_label == nomamec::closed_form::KktCase::Case1 {
        gap.abs() <= tol
    } else {
        gap <= tol
    };
    out.push(check(
        "closed_form_agreement",
        ok,
        format!(
            "{} closed form {:.9e} s, bisection {:.9e} s, relative gap {:.2e}",
            sol.case_label,
            sol.delay,
            bss.optimal_delay,
            gap / sol.delay
        ),
    ));
    let alloc = sol.allocation();
    let g = channel.gains();
    let mut worst: f64 = 0.0;
    for m in 0..2 {
        worst = worst.max(rel(local_time(alloc.betas[m], &config.users[m]), sol.delay));
    }
    let agg = aggregated_offload_time(1, &alloc.betas, g, &alloc.powers, &config.users, config.bandwidth)?;
    worst = worst.max(rel(agg, sol.delay));
    out.push(check(
        "equal_time",
        worst <= EQUAL_TIME_TOL,
        format!("local and aggregated offload times within {worst:.2e} of the delay"),
    ));
    let times = per_user_times(&sol, &params)?;
    let spread = rel(times[0].0, times[1].0);
    out.push(Check {
        name: "per_user_offload_time",
        status: Status::Info,
        detail: format!(
            "own-rate offload times {:.6e} s and {:.6e} s differ by {spread:.2e} relative",
            times[0].0, times[1].0
        ),
    });
    Ok(out)
}

/// Every check in order. Only `Fail` entries count against the scenario.
pub fn run(file: &ConfigFile, opts: &SolverOptions) -> Result<Vec<Check>, CliError> {
    opts.validate()?;
    let mut out = vec![sorted_check(file)];
    let draw = file.draw()?;
    let config = draw.apply(&file.scenario);
    let channel = &draw.channel;
    let g = channel.gains();
    let mut worst = telescoping_error(g, &vec![config.p_max; g.len()], config.bandwidth)?;
    let bss = if config.server.is_some() {
        out.push(skip("bss_certificate", "bisection does not handle a capacity-limited server"));
        None
    } else {
        match bss_solve(channel, &config, opts) {
            Ok(r) => Some(r),
            Err(nomamec::Error::Infeasible(msg)) => {
                // Then not even local computing may fit the budget.
                let local = Allocation::local_only(config.users.len());
                let hi = init_bounds(&config)?.1;
                let phi = nomamec::solver::max_violation(hi, &local, channel, &config)?;
                out.push(check("bss_certificate", phi > opts.eps_feas, format!("infeasible: {msg}")));
                None
            }
            Err(e) => return Err(e.into()),
        }
    };
    if let Some(r) = &bss {
        worst = worst.max(telescoping_error(g, &r.allocation.powers, config.bandwidth)?);
    }
    out.push(check(
        "telescoping",
        worst <= TELESCOPING_TOL,
        format!("largest relative gap {worst:.2e}"),
    ));
    let werr = lambert_identity_error(1000, 1e6)?;
    out.push(check("lambert_identity", werr <= LAMBERT_TOL, format!("largest scaled residual {werr:.2e}")));
    if let Some(r) = &bss {
        out.extend(bss_checks(r, channel, &config, opts)?);
        if config.users.len() == 2 {
            out.extend(two_user_checks(r, channel, &config, opts)?);
        }
    }
    Ok(out)
}

pub fn failures(checks: &[Check]) -> usize {
    checks.iter().filter(|c| c.status == Status::Fail).count()
}
