use serde::{Deserialize, Serialize};

use super::inventory::{MuInventory, PortMode};
use super::mu::MuSpec;
use super::schedule::{schedule, PairingPlan};
use crate::photon::{simulate_keyrate, ChannelSpec, SimulationConfig};
use crate::sns::{KeyRateReport, ProtocolParams, SecurityParams};
use crate::{Error, Result};

/// Extra per-arm loss of an MU: a `1:i` splitter (`10 log10 i` dB) plus a
/// fixed loss per binary splitting stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuLossModel {
    pub stage_loss_db: f64,
}

impl Default for MuLossModel {
    fn default() -> Self {
        MuLossModel { stage_loss_db: 1.0 }
    }
}

impl MuLossModel {
    pub fn none() -> Self {
        MuLossModel { stage_loss_db: 0.0 }
    }

    pub fn excess_db(&self, mu: &MuSpec) -> f64 {
        let i = mu.ports_per_user;
        if i <= 1 {
            return 0.0;
        }
        let stages = (i as f64).log2().ceil();
        10.0 * (i as f64).log10() + self.stage_loss_db * stages
    }
}

/// Settings shared by every pair of a network evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSetup {
    /// Fixed parameters for every pair; `None` picks the tabulated
    /// operating point nearest each pair's effective loss.
    pub params: Option<ProtocolParams>,
    pub security: SecurityParams,
    pub pulses: f64,
    pub loss_model: MuLossModel,
    pub sim: SimulationConfig,
}

impl Default for NetworkSetup {
    fn default() -> Self {
        NetworkSetup {
            params: None,
            security: SecurityParams::default(),
            pulses: 1e11,
            loss_model: MuLossModel::default(),
            sim: SimulationConfig::default(),
        }
    }
}

/// The 20 dB operating point below 25 dB of effective loss, the 30 dB one
/// above.
pub fn operating_point_for_loss(total_loss_db: f64) -> ProtocolParams {
    if total_loss_db < 25.0 {
        ProtocolParams::operating_point_20db()
    } else {
        ProtocolParams::operating_point_30db()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRate {
    pub user_a: u32,
    pub user_b: u32,
    pub mu_id: usize,
    pub mu: MuSpec,
    pub mu_excess_loss_db: f64,
    /// Fiber plus MU loss over both arms.
    pub effective_loss_db: f64,
    pub rate_per_pulse: f64,
    pub rate_bps: f64,
    pub feasible: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkReport {
    pub total_rate_per_pulse: f64,
    pub total_rate_bps: f64,
    pub pairs: Vec<PairRate>,
    /// Pairs that contributed zero because evaluation failed or the rate
    /// was infeasible.
    pub failed: usize,
    pub unserved: usize,
}

impl NetworkReport {
    pub fn best_pair(&self) -> Option<&PairRate> {
        self.pairs.iter().max_by(|a, b| a.rate_bps.total_cmp(&b.rate_bps))
    }

    pub fn worst_pair(&self) -> Option<&PairRate> {
        self.pairs.iter().min_by(|a, b| a.rate_bps.total_cmp(&b.rate_bps))
    }
}

/// Sum of secure key rates over the pairs of a plan. `channel_of` gives the
/// fiber channel of a user pair; MU loss is added per the pair's MU. A pair
/// whose evaluation fails contributes zero and is flagged.
pub fn network_rate(
    plan: &PairingPlan,
    setup: &NetworkSetup,
    channel_of: impl Fn(u32, u32) -> ChannelSpec,
) -> Result<NetworkReport> {
    if !(setup.pulses.is_finite() && setup.pulses >= 1.0) {
        return Err(Error::Domain {
            name: "N",
            value: setup.pulses,
            expected: "a positive pulse count",
        });
    }
    setup.security.validate()?;
    let mut cache: Vec<(ChannelSpec, ProtocolParams, std::result::Result<KeyRateReport, String>)> = Vec::new();
    let mut pairs = Vec::with_capacity(plan.assignments.len());
    for x in &plan.assignments {
        let unit = plan
            .units
            .get(x.mu_id)
            .ok_or_else(|| Error::InvalidParams(format!("unknown MU {}", x.mu_id)))?;
        let excess = setup.loss_model.excess_db(&unit.mu);
        let ch = ChannelSpec {
            mu_excess_loss_db: excess,
            ..channel_of(x.user_a, x.user_b)
        };
        let effective = ch.total_loss_db() + 2.0 * excess;
        let params = setup.params.unwrap_or_else(|| operating_point_for_loss(effective));
        let outcome = match cache.iter().find(|(c, p, _)| *c == ch && *p == params) {
            Some((_, _, r)) => r.clone(),
            None => {
                let r = simulate_keyrate(&params, &ch, setup.pulses, &setup.security, &setup.sim)
                    .map_err(|e| e.to_string());
                cache.push((ch, params, r.clone()));
                r
            }
        };
        let (rate, bps, feasible, error) = match outcome {
            Ok(r) => (r.rate_per_pulse, r.rate_bps, r.feasible, r.reason),
            Err(e) => {
                log::warn!("pair ({}, {}) failed: {e}", x.user_a, x.user_b);
                (0.0, 0.0, false, Some(e))
            }
        };
        pairs.push(PairRate {
            user_a: x.user_a,
            user_b: x.user_b,
            mu_id: x.mu_id,
            mu: unit.mu,
            mu_excess_loss_db: excess,
            effective_loss_db: effective,
            rate_per_pulse: rate,
            rate_bps: bps,
            feasible,
            error,
        });
    }
    Ok(NetworkReport {
        total_rate_per_pulse: pairs.iter().map(|p| p.rate_per_pulse).sum(),
        total_rate_bps: pairs.iter().map(|p| p.rate_bps).sum(),
        failed: pairs.iter().filter(|p| !p.feasible).count(),
        unserved: plan.unserved.len(),
        pairs,
    })
}

/// Every user of the inventory requests a key with every other, all over
/// `distance_km` of fiber with the node in the middle.
pub fn symmetric_network(
    inv: &MuInventory,
    distance_km: f64,
    setup: &NetworkSetup,
    mode: PortMode,
) -> Result<(PairingPlan, NetworkReport)> {
    let users = inv.groups().iter().map(|g| g.mu.n_users * g.count).sum::<u32>();
    let active: Vec<u32> = (0..users).collect();
    let requests: Vec<(u32, u32)> = (0..users).flat_map(|a| (a + 1..users).map(move |b| (a, b))).collect();
    let plan = schedule(inv, &active, &requests, mode)?;
    let ch = ChannelSpec::symmetric_km(distance_km);
    ch.validate()?;
    let report = network_rate(&plan, setup, |_, _| ch)?;
    Ok((plan, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitter_loss() {
        let m = MuLossModel::default();
        assert_eq!(m.excess_db(&MuSpec::two_user()), 0.0);
        let two = m.excess_db(&MuSpec::new(3, 2).unwrap());
        assert!((two - 4.0103).abs() < 1e-4);
        let eight = m.excess_db(&MuSpec::new(9, 8).unwrap());
        assert!((eight - (10.0 * 8f64.log10() + 3.0)).abs() < 1e-12);
        assert_eq!(MuLossModel::none().excess_db(&MuSpec::new(4, 3).unwrap()), 10.0 * 3f64.log10());
    }

    #[test]
    fn rate_falls_with_mu_size() {
        let inv = MuInventory::example_32_port();
        let setup = NetworkSetup::default();
        let (plan, rep) = symmetric_network(&inv, 100.0, &setup, PortMode::Inclusive).unwrap();
        assert_eq!(rep.pairs.len(), plan.served());
        let best = rep.best_pair().unwrap();
        assert_eq!(best.mu, MuSpec::two_user());
        let worst = rep.worst_pair().unwrap();
        assert!(worst.rate_bps <= best.rate_bps);
        assert!(rep.total_rate_per_pulse > 0.0);
    }

    #[test]
    fn failed_pairs_contribute_zero() {
        let inv = MuInventory::example_32_port();
        let setup = NetworkSetup::default();
        let (_, rep) = symmetric_network(&inv, 400.0, &setup, PortMode::Inclusive).unwrap();
        assert_eq!(rep.total_rate_per_pulse, 0.0);
        assert_eq!(rep.failed, rep.pairs.len());
    }
}
