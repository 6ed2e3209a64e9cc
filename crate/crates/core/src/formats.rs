//! Versioned JSON documents for inputs and reports, and CSV for sweeps.
//!
//! Every JSON file is an envelope `{"schema_version", "kind", "data"}`.
//! Unknown fields are rejected; parse errors carry line and column.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::netplan::{MuInventory, MuLossModel, PortMode, EXACT_SCHEDULE_MAX_USERS};
use crate::paramopt::{ParamBounds, SweepRow};
use crate::photon::{subsampled_aopp, ChannelSpec, Mode, PhaseFilter, SimulationConfig, FIBER_LOSS_DB_PER_KM};
use crate::sns::{
    AggregationMap, AoppMeasurement, Category, CategoryMap, DetectionTally, ProtocolParams, RateConversion,
    SecurityParams,
};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Document kinds, one per payload type.
pub trait Kind {
    const KIND: &'static str;
}

impl Kind for TallyFile {
    const KIND: &'static str = "tally";
}
impl Kind for ProtocolParams {
    const KIND: &'static str = "params";
}
impl Kind for SecurityParams {
    const KIND: &'static str = "security";
}
impl Kind for ChannelSpec {
    const KIND: &'static str = "channel";
}
impl Kind for MuInventory {
    const KIND: &'static str = "inventory";
}
impl Kind for RequestsFile {
    const KIND: &'static str = "requests";
}
impl Kind for ParamBounds {
    const KIND: &'static str = "bounds";
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope<T> {
    schema_version: u32,
    kind: String,
    data: T,
}

pub fn from_json<T: DeserializeOwned + Kind>(text: &str, source_name: &str) -> Result<T> {
    let parse_err = |message: String| Error::Parse {
        source_name: source_name.to_string(),
        message,
    };
    let env: Envelope<T> = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(parse_err(format!(
            "unsupported schema_version {}, expected {SCHEMA_VERSION}",
            env.schema_version
        )));
    }
    if env.kind != T::KIND {
        return Err(parse_err(format!("expected a '{}' document, found '{}'", T::KIND, env.kind)));
    }
    Ok(env.data)
}

pub fn to_json<T: Serialize + Kind>(value: &T) -> String {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        kind: T::KIND.to_string(),
        data: value,
    };
    serde_json::to_string_pretty(&env).expect("documents serialize")
}

pub fn read_json<T: DeserializeOwned + Kind>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    from_json(&text, &path.display().to_string())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TallyMetadata {
    /// Sent pulse pairs `N`.
    pub pulses: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_db: Option<f64>,
    /// User pair label, e.g. `1-3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<String>,
}

/// Error rates reported by the experiment, as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredQber {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub before_aopp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after_aopp: Option<f64>,
}

/// Detection statistics of one session, keyed by category label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TallyFile {
    pub metadata: TallyMetadata,
    /// Missing categories count as zero.
    pub counts: BTreeMap<Category, f64>,
    /// Decoy `xx` detections passing the phase filter.
    pub accepted: f64,
    /// Accepted decoy detections on the expected detector.
    pub correct: f64,
    /// Sent `xx` pairings passing the filter; defaults to
    /// `N * p_x^2 * pass_fraction`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xx_sent_accepted: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sent: Option<BTreeMap<Category, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<MeasuredQber>,
    /// Pairing statistics, when recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aopp: Option<AoppMeasurement>,
}

fn dense(m: &BTreeMap<Category, f64>) -> CategoryMap {
    let mut out = CategoryMap::default();
    for (&c, &v) in m {
        out.set(c, v);
    }
    out
}

fn sparse(m: &CategoryMap) -> BTreeMap<Category, f64> {
    m.iter().collect()
}

impl TallyFile {
    pub fn from_tally(tally: &DetectionTally, metadata: TallyMetadata) -> Self {
        TallyFile {
            metadata: TallyMetadata {
                pulses: tally.total_pulses,
                ..metadata
            },
            counts: sparse(&tally.counts),
            accepted: tally.xx_accepted,
            correct: tally.xx_correct,
            xx_sent_accepted: Some(tally.xx_sent_accepted),
            sent: tally.sent.as_ref().map(sparse),
            measured: None,
            aopp: None,
        }
    }

    pub fn to_tally(&self, params: &ProtocolParams, filter: &PhaseFilter) -> Result<DetectionTally> {
        let n = self.metadata.pulses;
        let tally = DetectionTally {
            total_pulses: n,
            counts: dense(&self.counts),
            sent: self.sent.as_ref().map(dense),
            xx_accepted: self.accepted,
            xx_correct: self.correct,
            xx_sent_accepted: self
                .xx_sent_accepted
                .unwrap_or(n * params.p_x * params.p_x * filter.pass_fraction(0.0)),
        };
        tally.validate()?;
        Ok(tally)
    }

    /// Recorded pairing statistics, or bit-level pairing on a synthetic raw
    /// key with the tally's key-window counts. A measured post-pairing error
    /// rate replaces the reconstructed one.
    pub fn aopp_measurement(&self, tally: &DetectionTally, subsample: u64, seed: u64) -> Result<AoppMeasurement> {
        let mut m = match self.aopp {
            Some(m) => m,
            None => subsampled_aopp(tally, subsample, seed)?,
        };
        if let Some(e) = self.measured.and_then(|q| q.after_aopp) {
            m.e_prime = e;
        }
        Ok(m)
    }
}

/// Users present on the network and the pairs asking for keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestsFile {
    pub active_users: Vec<u32>,
    pub requests: Vec<(u32, u32)>,
}

/// Modelling choices in effect for a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub chernoff_bounds: String,
    pub decoy_tx_normalization: String,
    pub aggregation: AggregationMap,
    pub vacuum_source: String,
    pub phase_slices: u32,
    pub phase_filter_lambda: f64,
    pub residual_phase: String,
    pub click_model: String,
    pub raw_key_bits: String,
    pub aopp_pair_count: String,
    pub expected_mode_aopp_subsample: u64,
    pub simulation_mode: Mode,
    pub seed: u64,
    pub loss_interpretation: String,
    pub fiber_loss_db_per_km: f64,
    pub mu_stage_loss_db: f64,
    pub port_mode: PortMode,
    pub schedule_method: String,
    pub optimizer: String,
    pub rate_conversion: RateConversion,
    pub clamps: String,
}

impl ModelSettings {
    pub fn new(sim: &SimulationConfig, port_mode: PortMode, loss_model: &MuLossModel) -> Self {
        ModelSettings {
            chernoff_bounds: "phi_U(x) = x + b/2 + sqrt(2bx + b^2/4), phi_L(x) = max(0, x - sqrt(2bx)), b = ln(1/eps)"
                .into(),
            decoy_tx_normalization: "per sent accepted xx pairing".into(),
            aggregation: sim.aggregation,
            vacuum_source: "emitted at mu_o in simulation, treated as vacuum in the analysis".into(),
            phase_slices: sim.filter.slices,
            phase_filter_lambda: sim.filter.lambda(),
            residual_phase: "i.i.d. Gaussian per pulse pair, std from the channel".into(),
            click_model: "threshold detectors, p = d - (1-d) expm1(-m)".into(),
            raw_key_bits: "user i bit = sent mu_y; user j bit = did not send mu_y".into(),
            aopp_pair_count: "n_g = pairs formed by the active 0/1 pairing".into(),
            expected_mode_aopp_subsample: sim.aopp_subsample,
            simulation_mode: sim.mode,
            seed: sim.seed,
            loss_interpretation: "total user-to-user loss split evenly over both arms".into(),
            fiber_loss_db_per_km: FIBER_LOSS_DB_PER_KM,
            mu_stage_loss_db: loss_model.stage_loss_db,
            port_mode,
            schedule_method: format!(
                "exact branch and bound up to {EXACT_SCHEDULE_MAX_USERS} requesting users, else largest MU first"
            ),
            optimizer: "coarse grid then coordinate descent, three starts, relative tolerance per sweep".into(),
            rate_conversion: sim.conversion,
            clamps: "listed per report".into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct ReportEnvelope<'a, T> {
    schema_version: u32,
    kind: &'a str,
    model_settings: &'a ModelSettings,
    data: &'a T,
}

pub fn report_json<T: Serialize>(kind: &str, settings: &ModelSettings, data: &T) -> String {
    let env = ReportEnvelope {
        schema_version: SCHEMA_VERSION,
        kind,
        model_settings: settings,
        data,
    };
    serde_json::to_string_pretty(&env).expect("reports serialize")
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}
