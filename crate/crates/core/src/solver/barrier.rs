//! Phase-I log-barrier method for the fixed-delay feasibility problem.
//!
//! With `u = p / p_max` the variables `(β, u)` live in the unit box. Let
//! `r_j(β, u)` be the normalized residuals of the rate, local-time and
//! energy constraints. We maximize `t` subject to `r_j + t < 0` and the open
//! box, following the central path with Newton steps. `max_j r_j` is then
//! minimized to within the duality gap `K/τ`, `K` being the barrier count.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use crate::model::UserSpec;

/// Fixed-delay constraint set for one scenario.
pub(crate) struct Problem<'a> {
    pub alpha: f64,
    pub gains: &'a [f64],
    pub users: &'a [UserSpec],
    pub bandwidth: f64,
    pub p_max: f64,
    pub e_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Status {
    Feasible,
    Infeasible,
    /// Neither certificate was reached within the budget.
    Inconclusive,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub status: Status,
    pub betas: Vec<f64>,
    pub powers: Vec<f64>,
    pub phi: f64,
    pub newton_steps: usize,
}

/// One constraint linearized at a point. `curvature` is `(w, m, 1 + x_m)`
/// for a rate constraint whose `u`-Hessian is `w·g gᵀ / (1 + x_m)²`.
struct Term {
    r: f64,
    grad: DVector<f64>,
    curvature: Option<(f64, usize, f64)>,
}

const TAU_GROWTH: f64 = 10.0;
const TAU_MAX: f64 = 1e14;
const CENTERING_TOL: f64 = 1e-8;
/// Rounding in the residuals (`s_j` is a small difference of O(1) terms)
/// puts a floor under the Newton decrement at large `τ`; centering is cut
/// off after this many steps instead of spinning on it.
const CENTERING_STEPS: usize = 40;

impl Problem<'_> {
    fn n_users(&self) -> usize {
        self.users.len()
    }

    fn energy_bounded(&self) -> bool {
        self.e_max.is_finite()
    }

    /// Normalized residuals in the order rate, local, energy; `≤ 0` holds.
    pub fn residuals(&self, betas: &[f64], powers: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.n_users());
        let mut bits = 0.0;
        let mut total = 0.0;
        let mut snr = 0.0;
        for m in 0..self.n_users() {
            bits += betas[m] * self.users[m].task_bits;
            total += self.users[m].task_bits;
            snr += self.gains[m] * powers[m];
            out.push((bits - self.alpha * self.bandwidth * snr.ln_1p() / LN_2) / total);
        }
        for (m, u) in self.users.iter().enumerate() {
            out.push((1.0 - betas[m]) - self.alpha / u.full_local_time());
        }
        for (m, u) in self.users.iter().enumerate() {
            out.push(if self.energy_bounded() {
                ((1.0 - betas[m]) * u.full_local_energy() + self.alpha * powers[m] - self.e_max)
                    / self.e_max
            } else {
                -1.0
            });
        }
        out
    }

    fn terms(&self, beta: &[f64], unit: &[f64]) -> Vec<Term> {
        let n = self.n_users();
        let dim = 2 * n;
        let mut terms = Vec::with_capacity(3 * n);
        let mut bits = 0.0;
        let mut total = 0.0;
        let mut snr = 0.0;
        for m in 0..n {
            bits += beta[m] * self.users[m].task_bits;
            total += self.users[m].task_bits;
            snr += self.gains[m] * self.p_max * unit[m];
            let w = self.alpha * self.bandwidth / (LN_2 * total);
            let mut grad = DVector::zeros(dim);
            for i in 0..=m {
                grad[i] = self.users[i].task_bits / total;
                grad[n + i] = -w * self.gains[i] * self.p_max / (1.0 + snr);
            }
            terms.push(Term {
                r: (bits - self.alpha * self.bandwidth * snr.ln_1p() / LN_2) / total,
                grad,
                curvature: Some((w, m, 1.0 + snr)),
            });
        }
        for (m, u) in self.users.iter().enumerate() {
            let mut grad = DVector::zeros(dim);
            grad[m] = -1.0;
            terms.push(Term {
                r: (1.0 - beta[m]) - self.alpha / u.full_local_time(),
                grad,
                curvature: None,
            });
        }
        if self.energy_bounded() {
            for (m, u) in self.users.iter().enumerate() {
                let mut grad = DVector::zeros(dim);
                grad[m] = -u.full_local_energy() / self.e_max;
                grad[n + m] = self.alpha * self.p_max / self.e_max;
                terms.push(Term {
                    r: ((1.0 - beta[m]) * u.full_local_energy()
                        + self.alpha * self.p_max * unit[m]
                        - self.e_max)
                        / self.e_max,
                    grad,
                    curvature: None,
                });
            }
        }
        terms
    }

    fn barrier_count(&self) -> f64 {
        let constraints = if self.energy_bounded() { 3 } else { 2 };
        ((constraints + 4) * self.n_users()) as f64
    }

    fn split(&self, z: &DVector<f64>) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.n_users();
        (
            z.rows(0, n).iter().copied().collect(),
            z.rows(n, n).iter().copied().collect(),
            z[2 * n],
        )
    }

    /// Barrier value, or `None` outside the domain.
    fn value(&self, z: &DVector<f64>, tau: f64) -> Option<f64> {
        let (beta, unit, t) = self.split(z);
        let mut f = -tau * t;
        for x in beta.iter().chain(&unit) {
            if !(*x > 0.0 && *x < 1.0) {
                return None;
            }
            f -= x.ln() + (1.0 - x).ln();
        }
        let powers: Vec<f64> = unit.iter().map(|u| u * self.p_max).collect();
        let mut residuals = self.residuals(&beta, &powers);
        if !self.energy_bounded() {
            residuals.truncate(2 * self.n_users());
        }
        for r in residuals {
            let s = -r - t;
            if !(s > 0.0) {
                return None;
            }
            f -= s.ln();
        }
        Some(f)
    }

    fn derivatives(&self, z: &DVector<f64>, tau: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n_users();
        let dim = 2 * n + 1;
        let (beta, unit, t) = self.split(z);
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        g[2 * n] = -tau;
        for (k, x) in beta.iter().chain(&unit).enumerate() {
            g[k] += -1.0 / x + 1.0 / (1.0 - x);
            h[(k, k)] += 1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x));
        }
        let mut a = DVector::zeros(dim);
        for term in self.terms(&beta, &unit) {
            let s = -term.r - t;
            a.rows_mut(0, 2 * n).copy_from(&term.grad);
            a[2 * n] = 1.0;
            g.axpy(1.0 / s, &a, 1.0);
            h.ger(1.0 / (s * s), &a, &a, 1.0);
            if let Some((w, m, one_px)) = term.curvature {
                let c = w / (one_px * one_px) / s;
                for i in 0..=m {
                    for j in 0..=m {
                        h[(n + i, n + j)] +=
                            c * self.gains[i] * self.p_max * self.gains[j] * self.p_max;
                    }
                }
            }
        }
        (g, h)
    }

    fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
        let scale = h.diagonal().amax().max(1.0);
        let mut shift = 0.0;
        for _ in 0..12 {
            let mut hs = h.clone();
            for k in 0..hs.nrows() {
                hs[(k, k)] += shift;
            }
            if let Some(chol) = hs.cholesky() {
                let d = chol.solve(&(-g));
                if d.iter().all(|v| v.is_finite()) {
                    return Some(d);
                }
            }
            shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
        }
        None
    }

    /// Minimizes `max_j r_j` over the box from the interior point
    /// `(beta0, unit0)`, stopping as soon as feasibility within `eps_feas`
    /// is certified either way.
    pub fn phase_one(&self, beta0: &[f64], unit0: &[f64], eps_feas: f64, budget: usize) -> Outcome {
        let n = self.n_users();
        let mut z = DVector::zeros(2 * n + 1);
        for m in 0..n {
            z[m] = beta0[m].clamp(1e-3, 1.0 - 1e-3);
            z[n + m] = unit0[m].clamp(1e-3, 1.0 - 1e-3);
        }
        let phi_at = |z: &DVector<f64>| {
            let (b, u, _) = self.split(z);
            let p: Vec<f64> = u.iter().map(|u| u * self.p_max).collect();
            self.residuals(&b, &p).into_iter().fold(f64::NEG_INFINITY, f64::max)
        };
        z[2 * n] = -phi_at(&z) - 1.0;
        let k = self.barrier_count();
        let mut tau = k;
        let mut steps = 0;
        let finish = |z: &DVector<f64>, status: Status, steps: usize| {
            let (b, u, _) = self.split(z);
            Outcome {
                status,
                powers: u.iter().map(|u| u * self.p_max).collect(),
                betas: b,
                phi: phi_at(z),
                newton_steps: steps,
            }
        };
        loop {
            // centering
            let mut centered = false;
            for _ in 0..CENTERING_STEPS {
                if steps >= budget {
                    return finish(&z, Status::Inconclusive, steps);
                }
                let (g, h) = self.derivatives(&z, tau);
                let Some(d) = Self::newton_direction(&g, &h) else {
                    break;
                };
                let decrement = -g.dot(&d);
                if decrement / 2.0 <= CENTERING_TOL {
                    centered = true;
                    break;
                }
                steps += 1;
                let f0 = match self.value(&z, tau) {
                    Some(f) => f,
                    None => break,
                };
                let mut step = 1.0;
                let mut moved = false;
                while step > 1e-20 {
                    let cand = &z + step * &d;
                    if let Some(f) = self.value(&cand, tau) {
                        if f <= f0 - 0.25 * step * decrement {
                            z = cand;
                            moved = true;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                if phi_at(&z) <= eps_feas {
                    return finish(&z, Status::Feasible, steps);
                }
                if !moved {
                    break;
                }
            }
            let t = z[2 * n];
            // the gap bound only holds on the central path
            if centered && t + k / tau < -eps_feas {
                return finish(&z, Status::Infeasible, steps);
            }
            if tau >= TAU_MAX {
                return finish(&z, Status::Inconclusive, steps);
            }
            tau *= TAU_GROWTH;
        }
    }
}
