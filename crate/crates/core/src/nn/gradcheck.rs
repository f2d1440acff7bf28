//! Central finite-difference verification of analytic gradients.

use alloc::vec::Vec;

/// Denominator floor of the relative error, so coordinates whose true
/// gradient is (near) zero are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub relative_errors: Vec<f64>,
    pub max_relative_error: f64,
    /// Coordinate with the largest error.
    pub worst: Option<usize>,
    pub passed: bool,
}

/// `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compare `analytic` with `(L(θ + h·e_i) − L(θ − h·e_i)) / 2h` for every
/// coordinate `i`.
pub fn finite_difference_check(
    mut loss: impl FnMut(&[f64]) -> f64,
    analytic: &[f64],
    theta: &[f64],
    step: f64,
    tolerance: f64,
) -> GradientCheck {
    assert_eq!(analytic.len(), theta.len(), "gradient length");
    let mut point = theta.to_vec();
    let mut relative_errors = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        point[i] = theta[i] + step;
        let up = loss(&point);
        point[i] = theta[i] - step;
        let down = loss(&point);
        point[i] = theta[i];
        let err = relative_error(analytic[i], (up - down) / (2.0 * step));
        relative_errors.push(if err.is_nan() { f64::INFINITY } else { err });
    }
    let worst = (0..relative_errors.len())
        .max_by(|&a, &b| relative_errors[a].total_cmp(&relative_errors[b]));
    let max_relative_error = worst.map_or(0.0, |i| relative_errors[i]);
    GradientCheck {
        passed: max_relative_error <= tolerance,
        relative_errors,
        max_relative_error,
        worst,
    }
}
