//! Physical-layer model: interference clicks, phase post-selection, expected
//! and sampled detection statistics, and bit-level pairing on raw keys.

mod aopp;
mod channel;
mod expected;
mod montecarlo;
mod response;
mod simulate;
pub mod truth;

pub use aopp::aopp_bitlevel;
pub use channel::{
    click_probabilities, single_click, ChannelSpec, FrameSpec, PhaseFilter, DEFAULT_RESIDUAL_PHASE_STD,
    FIBER_LOSS_DB_PER_KM,
};
pub use expected::expected_tally;
pub use montecarlo::{key_bits, monte_carlo_session, sample_session, RawKeyPair, SHARD_PULSES};
pub use response::{CellResponse, ResponseTable};
pub use simulate::{simulate, simulate_keyrate, subsampled_aopp, Mode, Simulation, SimulationConfig, AOPP_SUBSAMPLE};
