//! Real branches of the Lambert W function.
//!
//! `W0` is evaluated with Halley's iteration from a piecewise starting point.
//! `W-1` is only needed for arguments of the form `-exp(l)` whose magnitude
//! may underflow, so it is solved directly in log space.

use std::f64::consts::E;

use crate::error::{invalid, Result};

/// `-1/e`, the branch point.
pub const BRANCH_POINT: f64 = -1.0 / E;

const MAX_ITER: usize = 64;

/// Series around the branch point in `p = ±sqrt(2(e·x + 1))`.
fn branch_series(p: f64) -> f64 {
    -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
}

/// Principal branch `W0(x)`, the solution `w ≥ -1` of `w·e^w = x`.
///
/// Arguments within a few ulps below `-1/e` are treated as the branch point.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(invalid("x", "NaN has no Lambert W value"));
    }
    if x < BRANCH_POINT {
        if x >= BRANCH_POINT - 4.0 * f64::EPSILON {
            return Ok(-1.0);
        }
        return Err(invalid("x", format!("{x} is below -1/e")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let q = 2.0 * (E * x + 1.0);
    if q < 1e-3 {
        // the series error is O(q²), already below the target here
        let w = branch_series(q.max(0.0).sqrt());
        return Ok(polish(w, x).max(-1.0));
    }
    let mut w = if x < 1.0 {
        if q < 0.5 {
            branch_series(q.sqrt())
        } else {
            x.ln_1p() * (1.0 - x.ln_1p() / (2.0 + x.ln_1p()))
        }
    } else {
        let l1 = x.ln();
        let l2 = l1.ln().max(0.0);
        l1 - l2 + if l1 > 0.0 { l2 / l1 } else { 0.0 }
    };
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

/// One Newton step on `w·e^w - x`, skipped where the derivative vanishes.
fn polish(w: f64, x: f64) -> f64 {
    let d = w.exp() * (w + 1.0);
    if d.abs() < 1e-6 {
        return w;
    }
    let next = w - (w * w.exp() - x) / d;
    if next.is_finite() {
        next
    } else {
        w
    }
}

/// Lower branch `W-1(-exp(l))` for `l ≤ -1`, i.e. the root `w ≤ -1` of
/// `w + ln(-w) = l`.
///
/// Returns `None` for `l > -1`, where the argument lies below `-1/e`.
pub fn lambert_wm1_from_log(l: f64) -> Option<f64> {
    if l.is_nan() || l > -1.0 {
        return None;
    }
    if l == -1.0 {
        return Some(-1.0);
    }
    if l == f64::NEG_INFINITY {
        return Some(f64::NEG_INFINITY);
    }
    let mut w = if l > -2.0 {
        // e·x + 1 with x = -exp(l)
        let q = -(l + 1.0).exp_m1();
        branch_series(-(2.0 * q).sqrt())
    } else {
        l - (-l).ln()
    };
    w = w.min(-1.0);
    // h(w) = w + ln(-w) - l is concave and increasing on w ≤ -1, so Newton
    // iterates approach the root from the left and stay on the branch
    for _ in 0..MAX_ITER {
        let h = w + (-w).ln() - l;
        let dh = 1.0 + 1.0 / w;
        if dh <= 0.0 {
            break;
        }
        let step = h / dh;
        let next = (w - step).min(-1.0);
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * w.abs();
        w = next;
        if done {
            break;
        }
    }
    Some(w)
}

/// Lower branch `W-1(x)` for `x` in `[-1/e, 0)`.
pub fn lambert_wm1(x: f64) -> Result<f64> {
    if !(x < 0.0) || x < BRANCH_POINT - 4.0 * f64::EPSILON {
        return Err(invalid("x", format!("{x} is outside [-1/e, 0)")));
    }
    Ok(lambert_wm1_from_log((-x).ln().min(-1.0)).unwrap_or(-1.0))
}
