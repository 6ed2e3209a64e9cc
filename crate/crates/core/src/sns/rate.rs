use serde::{Deserialize, Serialize};

use super::aopp::{aopp_trace, AoppEstimate, AoppMeasurement};
use super::decoy::{decoy_trace, DecoyBounds};
use super::entropy::binary_entropy;
use super::pairs::AggregationMap;
use super::params::{ProtocolParams, SecurityParams};
use super::tally::DetectionTally;
use crate::{Error, Result};

/// Conversion from bit/pulse to bit/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConversion {
    pub clock_hz: f64,
    /// Fraction of clock slots that carry signal pulses.
    pub signal_duty: f64,
}

impl Default for RateConversion {
    /// 100 MHz clock, 400 signal slots per 1024-slot frame.
    fn default() -> Self {
        RateConversion {
            clock_hz: 1e8,
            signal_duty: 400.0 / 1024.0,
        }
    }
}

impl RateConversion {
    pub fn to_bps(&self, rate_per_pulse: f64) -> Result<f64> {
        bits_per_second(rate_per_pulse, self.clock_hz, self.signal_duty)
    }
}

pub fn bits_per_second(rate_per_pulse: f64, clock_hz: f64, signal_duty: f64) -> Result<f64> {
    if !(signal_duty > 0.0 && signal_duty <= 1.0) {
        return Err(Error::Domain {
            name: "signal_duty",
            value: signal_duty,
            expected: "(0, 1]",
        });
    }
    if !(clock_hz > 0.0 && clock_hz.is_finite()) {
        return Err(Error::Domain {
            name: "clock_hz",
            value: clock_hz,
            expected: "> 0",
        });
    }
    Ok(rate_per_pulse * clock_hz * signal_duty)
}

/// Raw evaluation of the finite-key rate formula, unclamped:
///
/// `R = [n1'(1 - h(e1')) - f n_t' h(E') - 2 log2(2/eps_cor) - 4 log2(1/(sqrt2 eps_pa eps_hat))] / N`
pub fn secure_key_rate(
    n1_prime: f64,
    e1ph_prime: f64,
    n_t_prime: f64,
    e_prime: f64,
    n: f64,
    sec: &SecurityParams,
) -> f64 {
    let privacy = n1_prime * (1.0 - binary_entropy(e1ph_prime));
    let leak = sec.f_ec * n_t_prime * binary_entropy(e_prime);
    let correction = 2.0 * (2.0 / sec.eps_cor).log2();
    let amplification = 4.0 * (1.0 / (std::f64::consts::SQRT_2 * sec.eps_pa * sec.eps_hat)).log2();
    (privacy - leak - correction - amplification) / n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    /// Secure bits per sent pulse pair, clamped at zero.
    pub rate_per_pulse: f64,
    pub rate_bps: f64,
    /// Formula value before clamping; negative when no key can be extracted.
    pub rate_unclamped: f64,
    pub feasible: bool,
    /// Why the report is infeasible, when it is.
    pub reason: Option<String>,
    pub total_pulses: f64,
    pub conversion: RateConversion,
    pub decoy: DecoyBounds,
    pub aopp: AoppEstimate,
}

/// Final step of the chain: evaluates the rate from the AOPP estimate.
pub fn key_rate(
    decoy: &DecoyBounds,
    aopp: &AoppEstimate,
    n: f64,
    sec: &SecurityParams,
    conversion: &RateConversion,
) -> Result<KeyRateReport> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Domain {
            name: "N",
            value: n,
            expected: "> 0",
        });
    }
    sec.validate()?;
    let reason = decoy
        .infeasible
        .as_ref()
        .map(|g| format!("decoy bounds infeasible: {g}"))
        .or_else(|| aopp.infeasible.clone());
    let raw = if reason.is_some() {
        0.0
    } else {
        secure_key_rate(aopp.n1_prime, aopp.e1ph_prime, aopp.n_t_prime, aopp.e_prime, n, sec)
    };
    let (rate, feasible, reason) = match reason {
        Some(r) => (0.0, false, Some(r)),
        None if raw > 0.0 => (raw, true, None),
        None => (0.0, false, Some(format!("key rate formula is non-positive ({raw:.6e})"))),
    };
    Ok(KeyRateReport {
        rate_per_pulse: rate,
        rate_bps: conversion.to_bps(rate)?,
        rate_unclamped: raw,
        feasible,
        reason,
        total_pulses: n,
        conversion: *conversion,
        decoy: decoy.clone(),
        aopp: aopp.clone(),
    })
}

/// Options of the analysis pipeline that are not part of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub aggregation: AggregationMap,
    pub conversion: RateConversion,
}

/// Runs decoy bounds, the AOPP chain and the rate formula. Infeasibility is a
/// flagged zero-rate report; only malformed input is an error.
pub fn analyze(
    tally: &DetectionTally,
    params: &ProtocolParams,
    sec: &SecurityParams,
    measured: &AoppMeasurement,
    opts: &AnalysisOptions,
) -> Result<KeyRateReport> {
    let decoy = decoy_trace(tally, params, sec, opts.aggregation)?;
    let aopp = aopp_trace(&decoy, measured, sec)?;
    key_rate(&decoy, &aopp, tally.total_pulses, sec, &opts.conversion)
}
