//! Finite-key analysis of sending-or-not-sending twin-field key distribution
//! with actively odd-parity pairing.

mod aopp;
mod chernoff;
mod decoy;
mod entropy;
mod pairs;
mod params;
mod rate;
mod tally;

pub use aopp::{aopp_estimate, aopp_trace, AoppEstimate, AoppMeasurement};
pub use chernoff::{chernoff_expected_lower, chernoff_expected_upper, chernoff_real_lower, chernoff_real_upper};
pub use decoy::{decoy_bounds, decoy_bounds_with, decoy_trace, DecoyBounds, YieldBounds};
pub use entropy::shannon_entropy;
pub use pairs::{
    expected_pair_counts, AggregationMap, Category, CategoryMap, Intensity, IntensityTable, PairCounts, UserChoice,
};
pub use params::{ProtocolParams, SecurityParams};
pub use rate::{analyze, bits_per_second, key_rate, secure_key_rate, AnalysisOptions, KeyRateReport, RateConversion};
pub use tally::DetectionTally;
