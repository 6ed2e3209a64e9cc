//! Decoy-state bounds on the untagged (single-photon) statistics.

use serde::{Deserialize, Serialize};

use super::chernoff::{chernoff_expected_lower, chernoff_expected_upper};
use super::pairs::{AggregationMap, Intensity};
use super::params::{ProtocolParams, SecurityParams};
use super::tally::DetectionTally;
use crate::{Error, Result};

/// Expected-yield bounds for one intensity pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct YieldBounds {
    pub detections: f64,
    pub sent: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub s01_lower: f64,
    pub s10_lower: f64,
    pub s1_lower: f64,
    /// Expected untagged bit counts.
    pub n10_lower: f64,
    pub n01_lower: f64,
    pub e1ph_upper: f64,

    pub s_oo: YieldBounds,
    pub s_ox: YieldBounds,
    pub s_xo: YieldBounds,
    pub s_oy: YieldBounds,
    pub s_yo: YieldBounds,
    /// `m_x / N_x`, errors per sent filter-passing `xx` pairing (used).
    pub tx_per_sent: f64,
    /// `m_x / xx_accepted`, errors per accepted detection (reported only).
    pub tx_per_detected: f64,
    pub tx_upper: f64,
    /// Every value that had to be clamped into its physical range.
    pub clamps: Vec<String>,
    /// The guard that made the bounds unusable, if any.
    pub infeasible: Option<String>,
}

impl DecoyBounds {
    pub fn is_feasible(&self) -> bool {
        self.infeasible.is_none()
    }
}

fn clamp_record(clamps: &mut Vec<String>, name: &str, v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        clamps.push(format!("{name}: NaN -> {lo}"));
        return lo;
    }
    if v < lo {
        clamps.push(format!("{name}: {v:.6e} -> {lo}"));
        lo
    } else if v > hi {
        clamps.push(format!("{name}: {v:.6e} -> {hi}"));
        hi
    } else {
        v
    }
}

fn yield_bounds(n: f64, big_n: f64, eps: f64, clamps: &mut Vec<String>, name: &str) -> Result<YieldBounds> {
    if big_n <= 0.0 {
        return Ok(YieldBounds {
            detections: n,
            sent: big_n,
            lower: 0.0,
            upper: 1.0,
        });
    }
    let lower = chernoff_expected_lower(n, eps)? / big_n;
    let upper = chernoff_expected_upper(n, eps)? / big_n;
    Ok(YieldBounds {
        detections: n,
        sent: big_n,
        lower: clamp_record(clamps, &format!("{name}.lower"), lower, 0.0, 1.0),
        upper: clamp_record(clamps, &format!("{name}.upper"), upper, 0.0, 1.0),
    })
}

/// Computes the decoy bounds, returning an error when they cannot support a
/// key (`s1_lower <= 0` or `e1ph_upper >= 1/2`).
pub fn decoy_bounds(tally: &DetectionTally, params: &ProtocolParams, sec: &SecurityParams) -> Result<DecoyBounds> {
    decoy_bounds_with(tally, params, sec, AggregationMap::default())
}

pub fn decoy_bounds_with(
    tally: &DetectionTally,
    params: &ProtocolParams,
    sec: &SecurityParams,
    map: AggregationMap,
) -> Result<DecoyBounds> {
    let b = decoy_trace(tally, params, sec, map)?;
    match &b.infeasible {
        Some(guard) => Err(Error::infeasible(guard.clone())),
        None => Ok(b),
    }
}

/// Like [`decoy_bounds_with`] but always returns the full trace; infeasibility
/// is reported in [`DecoyBounds::infeasible`]. Errors only on invalid input.
pub fn decoy_trace(
    tally: &DetectionTally,
    params: &ProtocolParams,
    sec: &SecurityParams,
    map: AggregationMap,
) -> Result<DecoyBounds> {
    let (mx, my) = (params.mu_x, params.mu_y);
    if my == mx {
        return Err(Error::DegenerateDenominator);
    }
    params.validate()?;
    sec.validate()?;
    tally.validate()?;
    let eps = sec.eps_chernoff;
    let n = tally.detections(map);
    let big_n = tally.sent_pairs(params, map);
    let mut out = DecoyBounds::default();
    let clamps = &mut out.clamps;

    use Intensity::*;
    let s_oo = yield_bounds(n.get(O, O), big_n.get(O, O), eps, clamps, "S_oo")?;
    let s_ox = yield_bounds(n.get(O, X), big_n.get(O, X), eps, clamps, "S_ox")?;
    let s_xo = yield_bounds(n.get(X, O), big_n.get(X, O), eps, clamps, "S_xo")?;
    let s_oy = yield_bounds(n.get(O, Y), big_n.get(O, Y), eps, clamps, "S_oy")?;
    let s_yo = yield_bounds(n.get(Y, O), big_n.get(Y, O), eps, clamps, "S_yo")?;

    // Subtracted yields take their upper bound, added ones their lower bound.
    let denom = my * mx * (my - mx);
    let s01 = (my * my * mx.exp() * s_ox.lower - mx * mx * my.exp() * s_oy.upper - (my * my - mx * mx) * s_oo.upper) / denom;
    let s10 = (my * my * mx.exp() * s_xo.lower - mx * mx * my.exp() * s_yo.upper - (my * my - mx * mx) * s_oo.upper) / denom;
    let s01 = clamp_record(clamps, "s01_lower", s01, 0.0, 1.0);
    let s10 = clamp_record(clamps, "s10_lower", s10, 0.0, 1.0);
    let s1 = 0.5 * (s01 + s10);

    let untagged = tally.total_pulses
        * params.p_y
        * params.p_y
        * params.eps_send
        * (1.0 - params.eps_send)
        * my
        * (-my).exp();

    out.s_oo = s_oo;
    out.s_ox = s_ox;
    out.s_xo = s_xo;
    out.s_oy = s_oy;
    out.s_yo = s_yo;
    out.s01_lower = s01;
    out.s10_lower = s10;
    out.s1_lower = s1;
    out.n10_lower = untagged * s10;
    out.n01_lower = untagged * s01;

    let m_x = tally.xx_errors();
    out.tx_per_detected = if tally.xx_accepted > 0.0 {
        m_x / tally.xx_accepted
    } else {
        0.0
    };
    if tally.xx_sent_accepted <= 0.0 {
        out.e1ph_upper = 0.5;
        out.infeasible = Some("no sent decoy pairings pass the phase filter (N_x = 0)".into());
        return Ok(out);
    }
    out.tx_per_sent = m_x / tally.xx_sent_accepted;
    out.tx_upper = chernoff_expected_upper(m_x, eps)? / tally.xx_sent_accepted;

    if s1 <= 0.0 {
        out.e1ph_upper = 0.5;
        out.infeasible = Some(format!("s1_lower = {s1} <= 0"));
        return Ok(out);
    }
    let vac = (-2.0 * mx).exp();
    let e1 = (out.tx_upper - vac * s_oo.lower / 2.0) / (2.0 * mx * vac * s1);
    let clamps = &mut out.clamps;
    let e1 = clamp_record(clamps, "e1ph_upper", e1, 0.0, 0.5);
    out.e1ph_upper = e1;
    if e1 >= 0.5 {
        out.infeasible = Some("e1ph_upper >= 0.5".into());
    }
    Ok(out)
}
