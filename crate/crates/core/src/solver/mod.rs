//! Bisection on the delay level with a convex feasibility oracle.
//!
//! For a fixed level `α` the set of allocations meeting every user's rate,
//! local-time, energy and box constraint is convex, and it only grows with
//! `α`. The smallest feasible `α` is therefore found by halving the bracket
//! `[0, max_m L_m C_m / f_m]`.

mod barrier;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Allocation, ChannelRealization, ScenarioConfig};
use barrier::{Problem, Status};

/// Tolerances of the outer bisection and the inner feasibility test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Final bracket width in seconds.
    pub eps: f64,
    /// Largest accepted normalized constraint residual.
    pub eps_feas: f64,
    /// Newton steps allowed per feasibility test.
    pub inner_budget: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            eps_feas: 1e-8,
            inner_budget: 1000,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid("eps", "must be finite and > 0"));
        }
        if !(self.eps_feas > 0.0 && self.eps_feas.is_finite()) {
            return Err(invalid("eps_feas", "must be finite and > 0"));
        }
        if self.inner_budget == 0 {
            return Err(invalid("inner_budget", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub witness: Option<Allocation>,
    /// Largest normalized residual at the best point found.
    pub residual: f64,
    pub inner_iterations: usize,
    /// Set when the budget ran out before either certificate; the level is
    /// then reported infeasible.
    pub inconclusive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub alpha: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub optimal_delay: f64,
    pub allocation: Allocation,
    /// Bisection steps, excluding the initial check of the upper bound.
    pub iterations: usize,
    pub trace: Vec<TraceStep>,
    /// Bracket at termination.
    pub bracket: (f64, f64),
    pub converged: bool,
    /// Largest normalized residual of `allocation` at `optimal_delay`.
    pub feasibility_residual: f64,
    /// Feasibility tests that exhausted their budget.
    pub inconclusive_checks: usize,
}

/// Which constraint a residual belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// Prefix bits against prefix sum rate over `α`.
    Rate,
    LocalTime,
    Energy,
    BetaLower,
    BetaUpper,
    PowerLower,
    PowerUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub kind: ConstraintKind,
    pub user: usize,
    /// Normalized; `≤ 0` means satisfied.
    pub value: f64,
}

/// Bracket `(0, max_m L_m C_m / f_m)`: at the upper end everything can be
/// computed locally in time.
pub fn init_bounds(config: &ScenarioConfig) -> Result<(f64, f64)> {
    config.validate()?;
    let hi = config
        .users
        .iter()
        .map(|u| u.full_local_time())
        .fold(0.0, f64::max);
    Ok((0.0, hi))
}

fn check_inputs(channel: &ChannelRealization, config: &ScenarioConfig) -> Result<()> {
    config.validate()?;
    if channel.len() != config.users.len() {
        return Err(Error::LengthMismatch {
            what: "gains",
            got: channel.len(),
            expected: config.users.len(),
        });
    }
    Ok(())
}

fn problem<'a>(alpha: f64, channel: &'a ChannelRealization, config: &'a ScenarioConfig) -> Problem<'a> {
    Problem {
        alpha,
        gains: channel.gains(),
        users: &config.users,
        bandwidth: config.bandwidth,
        p_max: config.p_max,
        e_max: config.e_max,
    }
}

/// Every constraint residual at level `alpha`. Rate residuals are scaled by
/// the prefix task size, energy by `e_max` and powers by `p_max`.
pub fn constraint_violations(
    alpha: f64,
    alloc: &Allocation,
    channel: &ChannelRealization,
    config: &ScenarioConfig,
) -> Result<Vec<Residual>> {
    check_inputs(channel, config)?;
    let n = config.users.len();
    if alloc.betas.len() != n || alloc.powers.len() != n {
        return Err(Error::LengthMismatch {
            what: "allocation",
            got: alloc.betas.len().min(alloc.powers.len()),
            expected: n,
        });
    }
    let raw = problem(alpha, channel, config).residuals(&alloc.betas, &alloc.powers);
    let kinds = [ConstraintKind::Rate, ConstraintKind::LocalTime, ConstraintKind::Energy];
    let mut out: Vec<Residual> = raw
        .iter()
        .enumerate()
        .map(|(k, &value)| Residual {
            kind: kinds[k / n],
            user: k % n,
            value,
        })
        .collect();
    for m in 0..n {
        let b = alloc.betas[m];
        let u = alloc.powers[m] / config.p_max;
        out.extend([
            Residual { kind: ConstraintKind::BetaLower, user: m, value: -b },
            Residual { kind: ConstraintKind::BetaUpper, user: m, value: b - 1.0 },
            Residual { kind: ConstraintKind::PowerLower, user: m, value: -u },
            Residual { kind: ConstraintKind::PowerUpper, user: m, value: u - 1.0 },
        ]);
    }
    Ok(out)
}

/// Largest residual of `alloc` at level `alpha`.
pub fn max_violation(
    alpha: f64,
    alloc: &Allocation,
    channel: &ChannelRealization,
    config: &ScenarioConfig,
) -> Result<f64> {
    Ok(constraint_violations(alpha, alloc, channel, config)?
        .iter()
        .map(|r| r.value)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Cheap candidates tried before the barrier method: full power with the
/// smallest offload share that meets the local-time and energy limits, and
/// pure local computing with the radio off.
fn heuristics(alpha: f64, config: &ScenarioConfig) -> Vec<Allocation> {
    let betas = config
        .users
        .iter()
        .map(|u| {
            let time = 1.0 - alpha / u.full_local_time();
            let energy = 1.0 - (config.e_max - alpha * config.p_max) / u.full_local_energy();
            time.max(energy).clamp(0.0, 1.0)
        })
        .collect();
    vec![
        Allocation::new(betas, vec![config.p_max; config.users.len()]),
        Allocation::local_only(config.users.len()),
    ]
}

/// Decides whether level `alpha` admits an allocation whose largest
/// normalized residual is at most `opts.eps_feas`.
pub fn check_feasibility(
    alpha: f64,
    channel: &ChannelRealization,
    config: &ScenarioConfig,
    opts: &SolverOptions,
) -> Result<FeasibilityReport> {
    check_inputs(channel, config)?;
    opts.validate()?;
    if !(alpha > 0.0) {
        return Ok(FeasibilityReport {
            feasible: false,
            witness: None,
            residual: f64::INFINITY,
            inner_iterations: 0,
            inconclusive: false,
        });
    }
    let mut best = f64::INFINITY;
    let mut best_alloc = None;
    for cand in heuristics(alpha, config) {
        let phi = max_violation(alpha, &cand, channel, config)?;
        if phi <= opts.eps_feas {
            return Ok(FeasibilityReport {
                feasible: true,
                witness: Some(cand),
                residual: phi,
                inner_iterations: 0,
                inconclusive: false,
            });
        }
        if phi < best {
            best = phi;
            best_alloc = Some(cand);
        }
    }
    let start = best_alloc.expect("at least one heuristic");
    let units: Vec<f64> = start.powers.iter().map(|p| p / config.p_max).collect();
    let out = problem(alpha, channel, config).phase_one(
        &start.betas,
        &units,
        opts.eps_feas,
        opts.inner_budget,
    );
    let feasible = out.status == Status::Feasible;
    Ok(FeasibilityReport {
        feasible,
        witness: feasible.then(|| Allocation::new(out.betas, out.powers)),
        residual: out.phi,
        inner_iterations: out.newton_steps,
        inconclusive: out.status == Status::Inconclusive,
    })
}

/// Outcome of [`bisect`].
#[derive(Debug, Clone)]
pub struct Bisection<W> {
    pub value: f64,
    pub witness: W,
    pub iterations: usize,
    pub trace: Vec<TraceStep>,
    pub bracket: (f64, f64),
}

/// Halves `[lo, hi]` until its width is at most `eps`, then tests the
/// midpoint. `hi` must already be known feasible with `hi_witness`.
///
/// The result is the midpoint when it is feasible, otherwise `hi`; the
/// witness is always one certified at the returned value.
pub fn bisect<W>(
    mut lo: f64,
    mut hi: f64,
    hi_witness: W,
    eps: f64,
    mut feasible: impl FnMut(f64) -> Result<Option<W>>,
) -> Result<Bisection<W>> {
    let mut witness = hi_witness;
    let mut trace = Vec::new();
    while hi - lo > eps {
        let mid = 0.5 * (lo + hi);
        let found = feasible(mid)?;
        trace.push(TraceStep {
            alpha: mid,
            feasible: found.is_some(),
        });
        match found {
            Some(w) => {
                hi = mid;
                witness = w;
            }
            None => lo = mid,
        }
    }
    let iterations = trace.len();
    let mid = 0.5 * (lo + hi);
    let (value, witness) = match feasible(mid)? {
        Some(w) if mid > lo => (mid, w),
        _ => (hi, witness),
    };
    Ok(Bisection {
        value,
        witness,
        iterations,
        trace,
        bracket: (lo, hi),
    })
}

/// Minimum completion time over all users with the matching allocation.
///
/// Fails with [`Error::Infeasible`] when even the upper bound admits no
/// allocation, and with [`Error::Unsupported`] for a capacity-limited server,
/// where the fixed-level constraint set is no longer convex.
pub fn bss_solve(
    channel: &ChannelRealization,
    config: &ScenarioConfig,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    check_inputs(channel, config)?;
    opts.validate()?;
    if config.server.is_some() {
        return Err(Error::Unsupported(
            "bisection with a capacity-limited server; use the two-user closed form".into(),
        ));
    }
    let (lo, hi) = init_bounds(config)?;
    let top = check_feasibility(hi, channel, config, opts)?;
    let Some(top_witness) = top.witness else {
        return Err(Error::Infeasible(format!(
            "no allocation meets the energy budget even at delay {hi} s (max residual {:.3e})",
            top.residual
        )));
    };
    let mut inconclusive = usize::from(top.inconclusive);
    let run = bisect(lo, hi, top_witness, opts.eps, |alpha| {
        let rep = check_feasibility(alpha, channel, config, opts)?;
        inconclusive += usize::from(rep.inconclusive);
        Ok(rep.witness)
    })?;
    let residual = max_violation(run.value, &run.witness, channel, config)?;
    Ok(SolveResult {
        optimal_delay: run.value,
        allocation: run.witness,
        iterations: run.iterations,
        converged: run.bracket.1 - run.bracket.0 <= opts.eps,
        trace: run.trace,
        bracket: run.bracket,
        feasibility_residual: residual,
        inconclusive_checks: inconclusive,
    })
}

/// `ceil(log2(width / eps))`, the number of halvings to reach `eps`.
pub fn expected_iterations(width: f64, eps: f64) -> usize {
    if width <= eps {
        0
    } else {
        (width / eps).log2().ceil() as usize
    }
}
