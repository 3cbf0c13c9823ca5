//! Piecewise-linear curves on a tenor grid.
//!
//! Values are linearly interpolated between grid points and held flat
//! outside the grid on both sides.

/// Value of the curve at time-to-maturity `x`.
pub fn interpolate(tenors: &[f64], values: &[f64], x: f64) -> f64 {
    debug_assert_eq!(tenors.len(), values.len());
    let n = tenors.len();
    if x <= tenors[0] {
        return values[0];
    }
    if x >= tenors[n - 1] {
        return values[n - 1];
    }
    // first grid point strictly above x
    let hi = tenors.partition_point(|t| *t <= x);
    let lo = hi - 1;
    let w = (x - tenors[lo]) / (tenors[hi] - tenors[lo]);
    values[lo] + w * (values[hi] - values[lo])
}

/// Running integral from 0 to each grid tenor (trapezoid rule, flat below
/// the first tenor).
pub fn cumulative_integral(tenors: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = values[0] * tenors[0];
    out.push(acc);
    for k in 1..values.len() {
        acc += 0.5 * (tenors[k] - tenors[k - 1]) * (values[k] + values[k - 1]);
        out.push(acc);
    }
    out
}

/// Integral of the interpolated curve from 0 to `x`, `0 <= x`.
pub fn integral_to(tenors: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= tenors[0] {
        return values[0] * x;
    }
    let mut acc = values[0] * tenors[0];
    for k in 1..tenors.len() {
        let (a, b) = (tenors[k - 1], tenors[k]);
        if x >= b {
            acc += 0.5 * (b - a) * (values[k] + values[k - 1]);
        } else {
            let vx = interpolate(tenors, values, x);
            return acc + 0.5 * (x - a) * (vx + values[k - 1]);
        }
    }
    acc + values[values.len() - 1] * (x - tenors[tenors.len() - 1])
}
