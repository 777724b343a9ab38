//! Analytic solution for two users.
//!
//! When every user's offload time equals its local time and the two
//! aggregated offload times coincide, the common delay is
//! `T = a1 / (b1 + R)` with `a1 = L1 + L2`, `b1 = f1/C1 + f2/C2` and
//! `R = B log2(1 + γ1 p1 + γ2 p2)`. The local energy becomes `κ_m T f_m³`, so
//! user `m`'s budget reads `a1 (κ_m f_m³ + p_m) ≤ E (b1 + R)`. Minimizing `T`
//! is maximizing `R` under these two constraints and the power box.
//!
//! With `p_m = (x − k)/g` a tight budget is `log2 x = A_m + c (x − k)`,
//! `c = B_m / g`. It has two roots, one on each real branch of Lambert W;
//! feasible powers lie between them. The candidates of the four KKT cases are
//! enumerated on both branches, filtered by primal feasibility and the one
//! with the largest rate is kept.

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lambert::{lambert_w0, lambert_wm1_from_log};
use crate::model::{
    aggregated_offload_time, local_time, user_energy, user_offload_time, Allocation,
    ChannelRealization, ScenarioConfig, ServerSpec, UserSpec,
};
use crate::solver::max_violation;

/// Acceptance tolerance of the primal feasibility filter.
pub const FILTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoUserParams {
    /// Weak user first, then strong user.
    pub users: [UserSpec; 2],
    pub gains: [f64; 2],
    pub bandwidth: f64,
    pub p_max: f64,
    pub e_max: f64,
}

impl TwoUserParams {
    pub fn new(
        users: [UserSpec; 2],
        gains: [f64; 2],
        bandwidth: f64,
        p_max: f64,
        e_max: f64,
    ) -> Result<Self> {
        let params = Self {
            users,
            gains,
            bandwidth,
            p_max,
            e_max,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn from_scenario(channel: &ChannelRealization, config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        if config.users.len() != 2 || channel.len() != 2 {
            return Err(invalid(
                "users",
                format!("the closed form needs exactly 2 users, got {}", config.users.len()),
            ));
        }
        let g = channel.gains();
        Self::new(
            [config.users[0].clone(), config.users[1].clone()],
            [g[0], g[1]],
            config.bandwidth,
            config.p_max,
            config.e_max,
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (i, u) in self.users.iter().enumerate() {
            u.validate(&format!("users[{i}]"))?;
        }
        crate::model::check_sorted_gains(&self.gains)?;
        for (name, v) in [("bandwidth", self.bandwidth), ("p_max", self.p_max)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be finite and > 0"));
            }
        }
        if !(self.e_max > 0.0) {
            return Err(invalid("e_max", "must be > 0"));
        }
        Ok(())
    }

    /// `L1 + L2`.
    pub fn a1(&self) -> f64 {
        self.users[0].task_bits + self.users[1].task_bits
    }

    /// `f1/C1 + f2/C2`.
    pub fn b1(&self) -> f64 {
        self.users[0].local_throughput() + self.users[1].local_throughput()
    }

    /// `κ_m f_m³`, the per-second local energy of user `m` at the common delay.
    fn local_power(&self, m: usize) -> f64 {
        self.users[m].kappa * self.users[m].cpu_freq.powi(3)
    }

    /// `A_m = κ_m a1 f_m³ / (E B) − b1 / B`.
    pub fn a_coef(&self, m: usize) -> f64 {
        let energy_term = if self.e_max.is_finite() {
            self.local_power(m) * self.a1() / (self.e_max * self.bandwidth)
        } else {
            0.0
        };
        energy_term - self.b1() / self.bandwidth
    }

    /// `B_m = a1 / (E B)`, the same for both users and zero for an
    /// unlimited budget.
    pub fn b_coef(&self) -> f64 {
        self.a1() / (self.e_max * self.bandwidth)
    }

    pub fn sum_rate(&self, p1: f64, p2: f64) -> f64 {
        self.bandwidth * (self.gains[0] * p1 + self.gains[1] * p2).ln_1p() / LN_2
    }

    /// Objective of the reduced problem.
    pub fn delay(&self, p1: f64, p2: f64) -> f64 {
        self.a1() / (self.b1() + self.sum_rate(p1, p2))
    }

    /// Budget residual of user `m` at the common delay, relative to `e_max`.
    pub fn energy_residual(&self, m: usize, p1: f64, p2: f64) -> f64 {
        if !self.e_max.is_finite() {
            return -1.0;
        }
        let p = [p1, p2][m];
        self.delay(p1, p2) * (self.local_power(m) + p) / self.e_max - 1.0
    }

    /// Equivalent scenario for the general model functions. Noise and
    /// geometry fields are placeholders since the gains are already
    /// normalized.
    pub fn to_scenario(&self) -> (ChannelRealization, ScenarioConfig) {
        let config = ScenarioConfig {
            bandwidth: self.bandwidth,
            noise_density_dbm: -174.0,
            users: self.users.to_vec(),
            p_max: self.p_max,
            e_max: self.e_max,
            path_loss_exp: 3.76,
            cell_radius: 500.0,
            server: None,
        };
        let channel = ChannelRealization::new(self.gains.to_vec()).expect("validated gains");
        (channel, config)
    }
}

/// The two powers at which a budget is exactly met. Powers strictly
/// between them satisfy it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRoot {
    /// Principal-branch root.
    pub lower: f64,
    /// Lower-branch root, `+∞` for an unlimited budget.
    pub upper: f64,
}

/// Roots in `p` of `log2(k + g p) = a + b p`.
///
/// `None` when the budget fails for every power.
pub fn tight_power(a: f64, b: f64, g: f64, k: f64) -> Option<EnergyRoot> {
    if b == 0.0 {
        return Some(EnergyRoot {
            lower: (a.exp2() - k) / g,
            upper: f64::INFINITY,
        });
    }
    // in x = k + g p: log2 x = a + c (x − k) with c = b/g, solved by
    // x = −W(z) / (c ln2), z = −c ln2 · 2^(a − c k); z is kept in log form
    let c = b / g;
    let log_neg_z = (c * LN_2).ln() + (a - c * k) * LN_2;
    if !(log_neg_z <= -1.0) {
        return None;
    }
    let to_power = |w: f64| -w / (b * LN_2) - k / g;
    let w0 = lambert_w0(-log_neg_z.exp()).ok()?;
    let wm1 = lambert_wm1_from_log(log_neg_z)?;
    Some(EnergyRoot {
        lower: to_power(w0),
        upper: to_power(wm1),
    })
}

/// Power of user 1 that exhausts its budget given `p2`.
pub fn p1_water(p2: f64, params: &TwoUserParams) -> Option<EnergyRoot> {
    tight_power(
        params.a_coef(0),
        params.b_coef(),
        params.gains[0],
        1.0 + params.gains[1] * p2,
    )
}

/// Power of user 2 that exhausts its budget given `p1`.
pub fn p2_water(p1: f64, params: &TwoUserParams) -> Option<EnergyRoot> {
    tight_power(
        params.a_coef(1),
        params.b_coef(),
        params.gains[1],
        1.0 + params.gains[0] * p1,
    )
}

/// Both budgets tight: `p1 = p2 + D` with `D = κ2 f2³ − κ1 f1³`. Returns the
/// roots in `p2`.
pub fn joint_water(params: &TwoUserParams) -> Option<EnergyRoot> {
    let d = params.local_power(1) - params.local_power(0);
    tight_power(
        params.a_coef(1),
        params.b_coef(),
        params.gains[0] + params.gains[1],
        1.0 + params.gains[0] * d,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KktCase {
    /// Both users at full power.
    Case1,
    /// User 1 at full power, user 2 on its budget.
    Case2,
    /// User 1 on its budget, user 2 at full power.
    Case3,
    /// Both users on their budgets.
    Case4,
}

impl fmt::Display for KktCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KktCase::Case1 => "Case1",
            KktCase::Case2 => "Case2",
            KktCase::Case3 => "Case3",
            KktCase::Case4 => "Case4",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// No tight budget involved.
    None,
    Principal,
    Lower,
}

/// One enumerated KKT point before filtering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub case: KktCase,
    pub branch: Branch,
    pub p1: f64,
    pub p2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoUserSolution {
    pub p1: f64,
    pub p2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub delay: f64,
    pub sum_rate: f64,
    pub case_label: KktCase,
    pub branch: Branch,
    /// Every constraint of the full problem holds at `delay`.
    pub valid: bool,
}

impl TwoUserSolution {
    pub fn allocation(&self) -> Allocation {
        Allocation::new(vec![self.beta1, self.beta2], vec![self.p1, self.p2])
    }
}

/// All KKT points on both branches, in case order.
pub fn candidates(params: &TwoUserParams) -> Vec<Candidate> {
    let pm = params.p_max;
    let mut out = vec![Candidate {
        case: KktCase::Case1,
        branch: Branch::None,
        p1: pm,
        p2: pm,
    }];
    let mut push = |case, root: Option<EnergyRoot>, pair: &dyn Fn(f64) -> (f64, f64)| {
        if let Some(r) = root {
            for (branch, p) in [(Branch::Lower, r.upper), (Branch::Principal, r.lower)] {
                let (p1, p2) = pair(p);
                out.push(Candidate { case, branch, p1, p2 });
            }
        }
    };
    push(KktCase::Case2, p2_water(pm, params), &|p| (pm, p));
    push(KktCase::Case3, p1_water(pm, params), &|p| (p, pm));
    let d = params.local_power(1) - params.local_power(0);
    push(KktCase::Case4, joint_water(params), &|p| (p + d, p));
    out
}

fn admissible(c: &Candidate, params: &TwoUserParams) -> Option<(f64, f64)> {
    let pm = params.p_max;
    let tol = FILTER_TOL * pm;
    for p in [c.p1, c.p2] {
        if !p.is_finite() || p < -tol || p > pm + tol {
            return None;
        }
    }
    let (p1, p2) = (c.p1.clamp(0.0, pm), c.p2.clamp(0.0, pm));
    for m in 0..2 {
        if params.energy_residual(m, p1, p2) > FILTER_TOL {
            return None;
        }
    }
    Some((p1, p2))
}

/// Offload shares giving every user the common delay `t`.
fn shares(t: f64, params: &TwoUserParams) -> (f64, f64) {
    let b = |u: &UserSpec| 1.0 - t / u.full_local_time();
    (b(&params.users[0]), b(&params.users[1]))
}

fn check_valid(sol: &TwoUserSolution, params: &TwoUserParams, server: Option<&ServerSpec>) -> bool {
    let in_unit = |b: f64| (0.0..=1.0).contains(&b);
    if !in_unit(sol.beta1) || !in_unit(sol.beta2) {
        return false;
    }
    let (channel, mut config) = params.to_scenario();
    let alloc = sol.allocation();
    match server {
        None => max_violation(sol.delay, &alloc, &channel, &config)
            .map(|v| v <= FILTER_TOL)
            .unwrap_or(false),
        Some(s) => {
            config.server = Some(s.clone());
            let Ok(t_s) = crate::model::server_time(&alloc.betas, &config.users, Some(s)) else {
                return false;
            };
            let slack = sol.delay * (1.0 + FILTER_TOL);
            (0..2).all(|m| {
                let g = channel.gains();
                let off = aggregated_offload_time(m, &alloc.betas, g, &alloc.powers, &config.users, config.bandwidth)
                    .unwrap_or(f64::INFINITY);
                let energy = user_energy(m, &alloc, g, &config.users, config.bandwidth).unwrap_or(f64::INFINITY);
                off + t_s <= slack
                    && local_time(alloc.betas[m], &config.users[m]) <= slack
                    && energy <= config.e_max * (1.0 + FILTER_TOL)
            })
        }
    }
}

fn pick(params: &TwoUserParams) -> Result<(Candidate, f64, f64)> {
    let mut best: Option<(Candidate, f64, f64, f64)> = None;
    for c in candidates(params) {
        if let Some((p1, p2)) = admissible(&c, params) {
            let r = params.sum_rate(p1, p2);
            if best.as_ref().is_none_or(|b| r > b.3) {
                best = Some((c, p1, p2, r));
            }
        }
    }
    best.map(|(c, p1, p2, _)| (c, p1, p2)).ok_or_else(|| {
        Error::ClosedFormUnavailable(
            "no KKT candidate meets the power box and both energy budgets".into(),
        )
    })
}

/// Closed-form optimum of the two-user problem.
pub fn solve_two_user(params: &TwoUserParams) -> Result<TwoUserSolution> {
    params.validate()?;
    let (c, p1, p2) = pick(params)?;
    let delay = params.delay(p1, p2);
    let (beta1, beta2) = shares(delay, params);
    let mut sol = TwoUserSolution {
        p1,
        p2,
        beta1,
        beta2,
        delay,
        sum_rate: params.sum_rate(p1, p2),
        case_label: c.case,
        branch: c.branch,
        valid: false,
    };
    sol.valid = check_valid(&sol, params, None);
    Ok(sol)
}

/// Two-user delay with a capacity-limited server, reusing the unlimited
/// optimal powers: `a1 / (b1 + 1/(1/R + C_S/f_S))`.
pub fn solve_two_user_limited(params: &TwoUserParams, server: &ServerSpec) -> Result<TwoUserSolution> {
    server.validate("server")?;
    let base = solve_two_user(params)?;
    let delay = limited_delay(params, server, base.sum_rate);
    let (beta1, beta2) = shares(delay, params);
    let mut sol = TwoUserSolution {
        beta1,
        beta2,
        delay,
        ..base
    };
    sol.valid = check_valid(&sol, params, Some(server));
    Ok(sol)
}

/// `a1 / (b1 + 1/(1/R + C_S/f_S))`.
pub fn limited_delay(params: &TwoUserParams, server: &ServerSpec, rate: f64) -> f64 {
    let per_bit = 1.0 / rate + server.cycles_per_bit / server.cpu_freq;
    params.a1() / (params.b1() + 1.0 / per_bit)
}

/// Per-user offload time over its own SIC rate and its local time, for
/// checking the equal-time structure of a solution.
pub fn per_user_times(sol: &TwoUserSolution, params: &TwoUserParams) -> Result<[(f64, f64); 2]> {
    let alloc = sol.allocation();
    let users = &params.users;
    let mut out = [(0.0, 0.0); 2];
    for (m, slot) in out.iter_mut().enumerate() {
        let off = user_offload_time(m, &alloc.betas, &params.gains, &alloc.powers, users, params.bandwidth)?;
        *slot = (off, local_time(alloc.betas[m], &users[m]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(gains: [f64; 2], kappa: [f64; 2], p_max: f64, e_max: f64) -> TwoUserParams {
        TwoUserParams::new(
            [
                UserSpec::new(1.6e6, 1e3, 1e9, kappa[0]),
                UserSpec::new(1.6e6, 1e3, 1e9, kappa[1]),
            ],
            gains,
            1e6,
            p_max,
            e_max,
        )
        .unwrap()
    }

    #[test]
    fn tight_roots_satisfy_equation() {
        let (a, b, g, k) = (-1.5, 0.8, 3.0, 1.2);
        let r = tight_power(a, b, g, k).unwrap();
        for p in [r.lower, r.upper] {
            let lhs = (k + g * p).log2();
            assert!((lhs - (a + b * p)).abs() < 1e-10, "p={p}");
        }
        assert!(r.lower < r.upper);
        assert!(tight_power(5.0, 0.8, 3.0, 1.2).is_none());
    }

    #[test]
    fn water_level_makes_budget_tight() {
        let pr = params([2e9, 4e9], [1e-27, 1e-28], 1.0, 0.2);
        let p2 = 0.3;
        let r = p1_water(p2, &pr).unwrap();
        for p1 in [r.lower, r.upper] {
            assert!(pr.energy_residual(0, p1, p2).abs() < 1e-9, "p1={p1}");
        }
        let r = p2_water(0.4, &pr).unwrap();
        assert!(pr.energy_residual(1, 0.4, r.upper).abs() < 1e-9);
    }

    #[test]
    fn unlimited_budget_gives_infinite_upper_root() {
        let pr = params([2e9, 4e9], [1e-28, 1e-28], 0.01, f64::INFINITY);
        assert_eq!(p1_water(0.01, &pr).unwrap().upper, f64::INFINITY);
        let sol = solve_two_user(&pr).unwrap();
        assert_eq!(sol.case_label, KktCase::Case1);
        assert_eq!((sol.p1, sol.p2), (0.01, 0.01));
    }

    #[test]
    fn symmetric_users_share_power_equally() {
        let pr = params([3e9, 3e9], [1e-28, 1e-28], 10.0, 0.5);
        let sol = solve_two_user(&pr).unwrap();
        assert_eq!(sol.case_label, KktCase::Case4);
        assert!((sol.p1 - sol.p2).abs() < 1e-12);
        assert!((sol.beta1 - sol.beta2).abs() < 1e-12);
    }

    #[test]
    fn case4_has_both_budgets_tight() {
        let pr = params([1e9, 3e9], [1e-28, 1e-28], 10.0, 0.3);
        let sol = solve_two_user(&pr).unwrap();
        assert_eq!(sol.case_label, KktCase::Case4);
        for m in 0..2 {
            assert!(pr.energy_residual(m, sol.p1, sol.p2).abs() < 1e-8);
        }
    }

    #[test]
    fn common_delay_and_shares_are_consistent() {
        let pr = params([1e9, 3e9], [1e-27, 1e-28], 0.01, 0.2);
        let sol = solve_two_user(&pr).unwrap();
        let t_loc = [
            local_time(sol.beta1, &pr.users[0]),
            local_time(sol.beta2, &pr.users[1]),
        ];
        for t in t_loc {
            assert!((t - sol.delay).abs() <= 1e-12 * sol.delay);
        }
        let alloc = sol.allocation();
        let t2 = aggregated_offload_time(1, &alloc.betas, &pr.gains, &alloc.powers, &pr.users, 1e6).unwrap();
        assert!((t2 - sol.delay).abs() <= 1e-9 * sol.delay);
    }

    #[test]
    fn starved_budget_falls_back() {
        let pr = params([1e3, 2e3], [1e-27, 1e-27], 0.01, 0.2);
        assert!(matches!(
            solve_two_user(&pr),
            Err(Error::ClosedFormUnavailable(_))
        ));
    }

    #[test]
    fn fast_server_recovers_unlimited_delay() {
        let pr = params([1e9, 3e9], [1e-28, 1e-28], 0.01, 0.2);
        let base = solve_two_user(&pr).unwrap();
        let server = ServerSpec {
            cycles_per_bit: 1e3,
            cpu_freq: 1e30,
            kappa: 1e-28,
        };
        let lim = solve_two_user_limited(&pr, &server).unwrap();
        assert!((lim.delay - base.delay).abs() <= 1e-12 * base.delay);
        let slow = ServerSpec {
            cpu_freq: 1e10,
            ..server
        };
        let lim = solve_two_user_limited(&pr, &slow).unwrap();
        assert!(lim.delay > base.delay);
        // infinite rate leaves the server as the only bottleneck
        let capped = limited_delay(&pr, &slow, f64::INFINITY);
        assert!((capped - pr.a1() / (pr.b1() + 1e10 / 1e3)).abs() < 1e-15);
    }

    #[test]
    fn rejects_wrong_user_count() {
        let (_, mut cfg) = params([1.0, 2.0], [1e-28; 2], 0.01, 0.2).to_scenario();
        cfg.users.push(cfg.users[0].clone());
        let ch = ChannelRealization::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(TwoUserParams::from_scenario(&ch, &cfg).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reduced_objective_is_midpoint_convex(
                a in (0.0f64..1.0, 0.0f64..1.0),
                b in (0.0f64..1.0, 0.0f64..1.0),
                g1 in 1e6f64..1e10,
                ratio in 1.0f64..10.0,
            ) {
                let pr = params([g1, g1 * ratio], [1e-28; 2], 1.0, 0.2);
                let f = |p: (f64, f64)| -(1.0 + pr.gains[0] * p.0 + pr.gains[1] * p.1).log2();
                let mid = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
                prop_assert!(f(mid) <= (f(a) + f(b)) / 2.0 + 1e-12);
            }

            #[test]
            fn chosen_candidate_is_feasible(
                g1 in 1e7f64..1e11,
                ratio in 1.0f64..20.0,
                p_max in 1e-3f64..2.0,
                e_max in 0.05f64..2.0,
            ) {
                let pr = params([g1, g1 * ratio], [1e-28, 1e-28], p_max, e_max);
                if let Ok(sol) = solve_two_user(&pr) {
                    prop_assert!(sol.p1 >= 0.0 && sol.p1 <= p_max);
                    prop_assert!(sol.p2 >= 0.0 && sol.p2 <= p_max);
                    for m in 0..2 {
                        prop_assert!(pr.energy_residual(m, sol.p1, sol.p2) <= FILTER_TOL);
                    }
                }
            }
        }
    }
}
