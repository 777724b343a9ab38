//! Brute-force reference for two users: scan a power grid, give every user
//! the common delay `a1/(b1 + R)` through its offload share, and keep the
//! best point that passes the full constraint check.

use serde::{Deserialize, Serialize};

use crate::closed_form::{TwoUserParams, FILTER_TOL};
use crate::error::{invalid, Result};
use crate::model::Allocation;
use crate::solver::max_violation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub delay: f64,
    pub allocation: Allocation,
    /// Largest delay change to a neighbouring grid point of the optimum.
    pub cell_effect: f64,
    /// Grid points that passed the check.
    pub admissible: usize,
}

/// Equal-time offload shares at delay `t`, clamped to `[0, 1]`.
pub fn equal_time_shares(t: f64, params: &TwoUserParams) -> [f64; 2] {
    params.users.clone().map(|u| (1.0 - t / u.full_local_time()).clamp(0.0, 1.0))
}

/// Scans `(cells + 1)²` points of `[0, p_max]²`. `None` when no grid point
/// is admissible.
pub fn grid_oracle(params: &TwoUserParams, cells: usize) -> Result<Option<GridOptimum>> {
    params.validate()?;
    if cells == 0 {
        return Err(invalid("cells", "must be > 0"));
    }
    let (channel, config) = params.to_scenario();
    let step = params.p_max / cells as f64;
    let n = cells + 1;
    let mut delay = vec![f64::INFINITY; n * n];
    let mut best: Option<(usize, usize)> = None;
    let mut admissible = 0;
    for i in 0..n {
        for j in 0..n {
            let (p1, p2) = (i as f64 * step, j as f64 * step);
            let t = params.delay(p1, p2);
            delay[i * n + j] = t;
            let alloc = Allocation::new(equal_time_shares(t, params).to_vec(), vec![p1, p2]);
            if max_violation(t, &alloc, &channel, &config)? <= FILTER_TOL {
                admissible += 1;
                if best.is_none_or(|(bi, bj)| t < delay[bi * n + bj]) {
                    best = Some((i, j));
                }
            }
        }
    }
    let Some((bi, bj)) = best else {
        return Ok(None);
    };
    let t = delay[bi * n + bj];
    let mut cell_effect: f64 = 0.0;
    for di in -1i64..=1 {
        for dj in -1i64..=1 {
            let (i, j) = (bi as i64 + di, bj as i64 + dj);
            if (0..n as i64).contains(&i) && (0..n as i64).contains(&j) {
                cell_effect = cell_effect.max((delay[i as usize * n + j as usize] - t).abs());
            }
        }
    }
    let (p1, p2) = (bi as f64 * step, bj as f64 * step);
    Ok(Some(GridOptimum {
        delay: t,
        allocation: Allocation::new(equal_time_shares(t, params).to_vec(), vec![p1, p2]),
        cell_effect,
        admissible,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UserSpec;

    fn params(gains: [f64; 2], p_max: f64, e_max: f64) -> TwoUserParams {
        TwoUserParams::new(
            [
                UserSpec::new(1.6e6, 1e3, 1e9, 1e-27),
                UserSpec::new(1.6e6, 1e3, 1e9, 1e-28),
            ],
            gains,
            1e6,
            p_max,
            e_max,
        )
        .unwrap()
    }

    #[test]
    fn unlimited_energy_picks_the_corner() {
        let p = params([1e6, 1e8], 0.01, f64::INFINITY);
        let opt = grid_oracle(&p, 20).unwrap().unwrap();
        assert_eq!(opt.allocation.powers, vec![0.01, 0.01]);
        assert_eq!(opt.delay, p.delay(0.01, 0.01));
        assert!(opt.cell_effect > 0.0);
    }

    #[test]
    fn tiny_budget_has_no_point() {
        let p = params([1e6, 1e8], 0.01, 1e-6);
        assert!(grid_oracle(&p, 10).unwrap().is_none());
    }

    #[test]
    fn shares_give_equal_local_times() {
        let p = params([1e6, 1e8], 0.01, 0.2);
        let t = 0.3;
        for (b, u) in equal_time_shares(t, &p).iter().zip(&p.users) {
            assert!((crate::model::local_time(*b, u) - t).abs() < 1e-12);
        }
    }
}
