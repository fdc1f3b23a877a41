//! Modified Bessel functions of the first kind, evaluated in the log domain.
//!
//! Both orders use the ascending power series below [`SERIES_LIMIT`] and the
//! Hankel asymptotic expansion above it. The scaled forms return
//! `ln(I_n(z)) - z`, which stays O(ln z) for arbitrarily large arguments.

use crate::error::{Error, Result};

/// Switch-over point between the power series and the asymptotic expansion.
pub const SERIES_LIMIT: f64 = 15.0;

const MAX_TERMS: usize = 500;

/// `ln I0(z)` for `z >= 0`.
pub fn log_bessel_i0(z: f64) -> Result<f64> {
    check_arg(z)?;
    Ok(ln_i0_scaled(z) + z)
}

/// `ln I0(z) - z` for `z >= 0`.
pub fn log_bessel_i0_scaled(z: f64) -> Result<f64> {
    check_arg(z)?;
    Ok(ln_i0_scaled(z))
}

fn check_arg(z: f64) -> Result<()> {
    if !z.is_finite() || z < 0.0 {
        return Err(Error::invalid(format!(
            "Bessel argument must be finite and non-negative, got {z}"
        )));
    }
    Ok(())
}

/// Unchecked `ln I0(z) - z`; callers guarantee `z` is finite and non-negative.
#[inline]
pub(crate) fn ln_i0_scaled(z: f64) -> f64 {
    if z < SERIES_LIMIT {
        // sum_k (z^2/4)^k / (k!)^2
        let q = 0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..MAX_TERMS {
            let kf = k as f64;
            term *= q / (kf * kf);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        sum.ln() - z
    } else {
        asymptotic_scaled(z, 0.0)
    }
}

/// Unchecked `ln I1(z) - z` for `z > 0`.
pub(crate) fn ln_i1_scaled(z: f64) -> f64 {
    if z < SERIES_LIMIT {
        // (z/2) sum_k (z^2/4)^k / (k! (k+1)!)
        let q = 0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..MAX_TERMS {
            let kf = k as f64;
            term *= q / (kf * (kf + 1.0));
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        (0.5 * z).ln() + sum.ln() - z
    } else {
        asymptotic_scaled(z, 1.0)
    }
}

/// `ln I_order(z) - z` from `e^z / sqrt(2 pi z) * sum_k (-1)^k a_k(order) / z^k`,
/// truncated before the terms start growing.
fn asymptotic_scaled(z: f64, order: f64) -> f64 {
    let mu = 4.0 * order * order;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * z * kf);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    -0.5 * (2.0 * std::f64::consts::PI * z).ln() + sum.ln()
}
