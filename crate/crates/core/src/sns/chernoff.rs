//! Chernoff-type conversions between expected and realized counts.
//!
//! With `beta = ln(1/eps)`:
//!
//! * expected → realized: `phi_U(x) = x + beta/2 + sqrt(2 beta x + beta^2/4)`,
//!   `phi_L(x) = max(0, x - sqrt(2 beta x))`;
//! * realized → expected: `E_U(k) = k + beta + sqrt(2 beta k + beta^2)`,
//!   `E_L(k) = max(0, k - sqrt(2 beta k))`.
//!
//! Each bound fails with probability at most `eps`.

use crate::{Error, Result};

fn beta(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain {
            name: "eps",
            value: eps,
            expected: "(0, 1)",
        });
    }
    Ok((1.0 / eps).ln())
}

fn check_count(name: &'static str, x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 || x.is_infinite() {
        return Err(Error::Domain {
            name,
            value: x,
            expected: "finite and >= 0",
        });
    }
    Ok(())
}

/// Upper bound on the realized value of a sum whose expectation is `x`.
pub fn chernoff_real_upper(x: f64, eps: f64) -> Result<f64> {
    check_count("x", x)?;
    let b = beta(eps)?;
    Ok(x + b / 2.0 + (2.0 * b * x + b * b / 4.0).sqrt())
}

/// Lower bound on the realized value of a sum whose expectation is `x`.
pub fn chernoff_real_lower(x: f64, eps: f64) -> Result<f64> {
    check_count("x", x)?;
    let b = beta(eps)?;
    Ok((x - (2.0 * b * x).sqrt()).max(0.0))
}

/// Upper bound on the expectation of the process that produced `k` events.
pub fn chernoff_expected_upper(k: f64, eps: f64) -> Result<f64> {
    check_count("k", k)?;
    let b = beta(eps)?;
    Ok(k + b + (2.0 * b * k + b * b).sqrt())
}

/// Lower bound on the expectation of the process that produced `k` events.
pub fn chernoff_expected_lower(k: f64, eps: f64) -> Result<f64> {
    check_count("k", k)?;
    let b = beta(eps)?;
    Ok((k - (2.0 * b * k).sqrt()).max(0.0))
}
