//! Central-difference validation of hand-derived gradients.
//!
//! The reported error per coordinate is
//! `|(f(x + h e_i) - f(x - h e_i)) / 2h - g_i| / max(1, |g_i|)`.
//! Piecewise functions (`abs`, hinges) are not differentiable at their
//! kinks; callers pass a skip predicate for coordinates within
//! [`KINK_TOL`] of one, and those coordinates are excluded from the maximum.

use crate::error::{check_dims, Error, Result};

pub const KINK_TOL: f64 = 1e-6;

pub fn near_kink(value: f64) -> bool {
    value.abs() < KINK_TOL
}

pub fn finite_diff_check(
    f: impl FnMut(&[f64]) -> f64,
    analytic: &[f64],
    point: &[f64],
    h: f64,
) -> Result<f64> {
    finite_diff_check_skipping(f, analytic, point, h, |_| false)
}

pub fn finite_diff_check_skipping(
    mut f: impl FnMut(&[f64]) -> f64,
    analytic: &[f64],
    point: &[f64],
    h: f64,
    skip: impl Fn(usize) -> bool,
) -> Result<f64> {
    check_dims("finite_diff_check", analytic.len(), point.len())?;
    if !(h > 0.0) {
        return Err(Error::contract(format!("step must be positive, got {h}")));
    }
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        if skip(i) {
            continue;
        }
        let orig = x[i];
        x[i] = orig + h;
        let plus = f(&x);
        x[i] = orig - h;
        let minus = f(&x);
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::numeric(format!(
                "objective not finite near coordinate {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * h);
        let err = (numeric - analytic[i]).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
