use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::aopp::aopp_bitlevel;
use super::channel::{ChannelSpec, PhaseFilter};
use super::expected::expected_tally;
use super::montecarlo::{monte_carlo_session, sample_session, RawKeyPair};
use crate::sns::{
    analyze, AggregationMap, AnalysisOptions, AoppMeasurement, Category, DetectionTally, KeyRateReport, ProtocolParams,
    RateConversion, SecurityParams,
};
use crate::{Error, Result};

/// Default size of the raw-key sub-sample used for AOPP in expected mode.
pub const AOPP_SUBSAMPLE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Expected tallies; AOPP on a proportional raw-key sub-sample.
    #[default]
    Expected,
    /// Per-pulse sampling.
    MonteCarlo,
    /// Cell-level multinomial sampling, same law as per-pulse sampling.
    Sampled,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expected" => Ok(Mode::Expected),
            "mc" | "monte_carlo" | "montecarlo" => Ok(Mode::MonteCarlo),
            "sampled" => Ok(Mode::Sampled),
            _ => Err(Error::InvalidParams(format!("unknown mode '{s}', expected expected|mc|sampled"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub mode: Mode,
    pub seed: u64,
    pub aopp_subsample: u64,
    pub filter: PhaseFilter,
    pub aggregation: AggregationMap,
    pub conversion: RateConversion,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            mode: Mode::Expected,
            seed: 0,
            aopp_subsample: AOPP_SUBSAMPLE,
            filter: PhaseFilter::default(),
            aggregation: AggregationMap::default(),
            conversion: RateConversion::default(),
        }
    }
}

/// Everything a simulated session produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub tally: DetectionTally,
    pub aopp: AoppMeasurement,
    pub report: KeyRateReport,
}

/// Secure key rate of one user pair over the given channel.
pub fn simulate_keyrate(
    params: &ProtocolParams,
    ch: &ChannelSpec,
    n: f64,
    sec: &SecurityParams,
    cfg: &SimulationConfig,
) -> Result<KeyRateReport> {
    Ok(simulate(params, ch, n, sec, cfg)?.report)
}

pub fn simulate(
    params: &ProtocolParams,
    ch: &ChannelSpec,
    n: f64,
    sec: &SecurityParams,
    cfg: &SimulationConfig,
) -> Result<Simulation> {
    let (tally, aopp) = match cfg.mode {
        Mode::Expected => {
            let tally = expected_tally(params, ch, &cfg.filter, n)?;
            let aopp = subsampled_aopp(&tally, cfg.aopp_subsample, cfg.seed)?;
            (tally, aopp)
        }
        Mode::MonteCarlo | Mode::Sampled => {
            let pulses = pulse_count(n)?;
            let session = if cfg.mode == Mode::MonteCarlo {
                monte_carlo_session
            } else {
                sample_session
            };
            let (key, tally) = session(params, ch, &cfg.filter, pulses, cfg.seed)?;
            let aopp = aopp_bitlevel(&key, cfg.seed ^ 0xA0)?;
            (tally, aopp)
        }
    };
    let opts = AnalysisOptions {
        aggregation: cfg.aggregation,
        conversion: cfg.conversion,
    };
    let report = analyze(&tally, params, sec, &aopp, &opts)?;
    Ok(Simulation { tally, aopp, report })
}

fn pulse_count(n: f64) -> Result<u64> {
    if !(n >= 1.0 && n.is_finite() && n <= u64::MAX as f64) {
        return Err(Error::Domain {
            name: "N",
            value: n,
            expected: "a positive pulse count",
        });
    }
    Ok(n.round() as u64)
}

/// AOPP statistics from a raw key of at most `size` bits whose categories
/// are in proportion to the tally's key-window counts; counts scale back to
/// the full raw key, rates carry over unchanged.
pub fn subsampled_aopp(tally: &DetectionTally, size: u64, seed: u64) -> Result<AoppMeasurement> {
    let n_t = tally.raw_key_length();
    let key: Vec<(Category, f64)> = tally.counts.iter().filter(|(c, _)| c.is_key_window()).collect();
    let m = (size as f64).min(n_t.round());
    if m < 2.0 {
        return Ok(AoppMeasurement {
            n_t,
            ..Default::default()
        });
    }
    let counts: Vec<(Category, u64)> = key.iter().map(|&(c, v)| (c, (v * m / n_t).round() as u64)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = RawKeyPair::from_counts(&counts, &mut rng);
    let sub = aopp_bitlevel(&raw, seed ^ 0x5EED)?;
    let scale = n_t / sub.n_t;
    Ok(AoppMeasurement {
        n_t,
        n_g: sub.n_g * scale,
        n_odd: sub.n_odd * scale,
        n_t_prime: (sub.n_t_prime * scale).min(n_t),
        e_prime: sub.e_prime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_sweep_is_monotone_and_reaches_zero() {
        let p = ProtocolParams::operating_point_20db();
        let sec = SecurityParams::default();
        let cfg = SimulationConfig::default();
        let mut last = f64::INFINITY;
        let mut hit_zero = false;
        for loss in (10..=60).step_by(5) {
            let r = simulate_keyrate(&p, &ChannelSpec::symmetric(loss as f64), 1e10, &sec, &cfg).unwrap();
            assert!(r.rate_per_pulse <= last, "{loss} dB: {} > {last}", r.rate_per_pulse);
            last = r.rate_per_pulse;
            hit_zero |= r.rate_per_pulse == 0.0;
        }
        assert!(hit_zero);
    }

    #[test]
    fn subsample_preserves_proportions() {
        let p = ProtocolParams::operating_point_20db();
        let t = expected_tally(&p, &ChannelSpec::symmetric(20.0), &PhaseFilter::default(), 1e10).unwrap();
        let m = subsampled_aopp(&t, 200_000, 1).unwrap();
        assert_eq!(m.n_t, t.raw_key_length());
        assert!(m.n_t_prime <= m.n_t && m.n_g <= m.n_t / 2.0 + 1.0);
        assert!(m.e_prime > 0.0 && m.e_prime < 0.05);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("mc".parse::<Mode>().unwrap(), Mode::MonteCarlo);
        assert_eq!("expected".parse::<Mode>().unwrap(), Mode::Expected);
        assert!("fast".parse::<Mode>().is_err());
    }
}
