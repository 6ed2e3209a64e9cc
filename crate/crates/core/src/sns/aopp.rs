//! Untagged-bit count and phase-error rate after actively odd-parity pairing.

use serde::{Deserialize, Serialize};

use super::chernoff::{chernoff_real_lower, chernoff_real_upper};
use super::decoy::DecoyBounds;
use super::params::SecurityParams;
use crate::{Error, Result};

/// Bit-level AOPP outcome, measured or simulated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AoppMeasurement {
    /// Raw key length before pairing.
    pub n_t: f64,
    /// Pairs formed by the active pairing.
    pub n_g: f64,
    /// Odd-parity pairs when user j groups the raw key at random.
    pub n_odd: f64,
    /// Surviving bits after the parity comparison.
    pub n_t_prime: f64,
    /// Bit error rate of the surviving bits.
    pub e_prime: f64,
}

impl AoppMeasurement {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_t", self.n_t),
            ("n_g", self.n_g),
            ("n_odd", self.n_odd),
            ("n_t_prime", self.n_t_prime),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be a non-negative count")));
            }
        }
        if !(0.0..=1.0).contains(&self.e_prime) {
            return Err(Error::InvalidParams(format!("E' = {} is not a rate", self.e_prime)));
        }
        if self.n_t_prime > self.n_t {
            return Err(Error::InvalidParams(format!(
                "n_t' = {} exceeds n_t = {}",
                self.n_t_prime, self.n_t
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AoppEstimate {
    pub u: f64,
    pub n_g: f64,
    pub n_odd: f64,
    pub n_t: f64,
    pub n_t_prime: f64,
    pub e_prime: f64,
    /// Realized untagged counts before pairing.
    pub n10: f64,
    pub n01: f64,
    pub n1: f64,
    /// Untagged pairs.
    pub n1r: f64,
    pub n10_prime: f64,
    pub n01_prime: f64,
    pub n_min: f64,
    pub n1_prime: f64,
    pub r: f64,
    pub e_tau: f64,
    pub m_s_upper: f64,
    pub e1ph_prime: f64,
    pub clamps: Vec<String>,
    pub infeasible: Option<String>,
}

impl AoppEstimate {
    pub fn is_feasible(&self) -> bool {
        self.infeasible.is_none()
    }
}

/// Evaluates the AOPP estimation chain and fails with the violated guard when
/// the chain leaves its domain.
pub fn aopp_estimate(decoy: &DecoyBounds, measured: &AoppMeasurement, sec: &SecurityParams) -> Result<AoppEstimate> {
    let est = aopp_trace(decoy, measured, sec)?;
    match &est.infeasible {
        Some(guard) => Err(Error::infeasible(guard.clone())),
        None => Ok(est),
    }
}

/// Full trace of the chain; infeasibility lands in [`AoppEstimate::infeasible`]
/// with every intermediate computed up to that point.
pub fn aopp_trace(decoy: &DecoyBounds, measured: &AoppMeasurement, sec: &SecurityParams) -> Result<AoppEstimate> {
    sec.validate()?;
    measured.validate()?;
    let eps = sec.eps_chernoff;
    let mut est = AoppEstimate {
        n_g: measured.n_g,
        n_odd: measured.n_odd,
        n_t: measured.n_t,
        n_t_prime: measured.n_t_prime,
        e_prime: measured.e_prime,
        ..Default::default()
    };
    macro_rules! fail {
        ($($arg:tt)*) => {{
            est.infeasible = Some(format!($($arg)*));
            return Ok(est);
        }};
    }

    if let Some(g) = &decoy.infeasible {
        fail!("decoy bounds infeasible: {g}");
    }
    if measured.n_t <= 0.0 {
        fail!("empty raw key (n_t = 0)");
    }
    if measured.n_odd <= 0.0 {
        fail!("no odd-parity pairs under random grouping (n_odd = 0)");
    }
    let u = measured.n_g / (2.0 * measured.n_odd);
    est.u = if u > 1.0 {
        est.clamps.push(format!("u: {u:.6e} -> 1"));
        1.0
    } else {
        u
    };

    est.n10 = chernoff_real_lower(decoy.n10_lower, eps)?;
    est.n01 = chernoff_real_lower(decoy.n01_lower, eps)?;
    est.n1 = est.n10 + est.n01;
    if est.n1 <= 0.0 {
        fail!("no untagged bits (n1 = 0)");
    }
    let n_t = measured.n_t;
    est.n1r = chernoff_real_lower((est.n1 / n_t) * (est.n1 / n_t) * est.u * n_t / 2.0, eps)?;
    if est.n1r <= 0.0 {
        fail!("no untagged pairs (n1r = 0)");
    }
    let correction = (-eps.ln() / (2.0 * est.n1r)).sqrt();
    est.n10_prime = 2.0 * est.n1r * (est.n10 / est.n1 - correction);
    est.n01_prime = 2.0 * est.n1r * (est.n01 / est.n1 - correction);
    est.n_min = est.n10_prime.min(est.n01_prime);
    if est.n_min <= 0.0 {
        fail!("n_min = {:.6e} <= 0", est.n_min);
    }
    let arg = est.n_min * (1.0 - est.n_min / (2.0 * est.n1r));
    if arg < 0.0 {
        fail!("negative argument {arg:.6e} in n1'");
    }
    est.n1_prime = 2.0 * chernoff_real_lower(arg, eps)?;
    if est.n1_prime > measured.n_t_prime {
        est.clamps.push(format!("n1': {:.6e} -> n_t' = {:.6e}", est.n1_prime, measured.n_t_prime));
        est.n1_prime = measured.n_t_prime;
    }
    if est.n1_prime <= 0.0 {
        fail!("n1' = 0");
    }

    let gap = est.n1 - 2.0 * est.n1r;
    if gap <= 0.0 {
        fail!("n1 = {:.6e} <= 2 n1r = {:.6e}", est.n1, 2.0 * est.n1r);
    }
    est.r = est.n1 / gap * (3.0 * gap * gap / eps).ln();
    if 2.0 * est.n1r <= est.r {
        fail!("2 n1r = {:.6e} <= r = {:.6e}", 2.0 * est.n1r, est.r);
    }
    est.e_tau = chernoff_real_upper(2.0 * est.n1r * decoy.e1ph_upper, eps)? / (2.0 * est.n1r - est.r);
    if est.e_tau >= 0.5 {
        fail!("e_tau = {:.6e} >= 0.5", est.e_tau);
    }
    if est.n1r < est.r {
        fail!("n1r = {:.6e} < r = {:.6e}", est.n1r, est.r);
    }
    est.m_s_upper = chernoff_real_upper((est.n1r - est.r) * est.e_tau * (1.0 - est.e_tau), eps)? + est.r;
    let e1 = 2.0 * est.m_s_upper / est.n1_prime;
    est.e1ph_prime = if e1 > 0.5 {
        est.clamps.push(format!("e1ph': {e1:.6e} -> 0.5"));
        0.5
    } else {
        e1
    };
    Ok(est)
}
