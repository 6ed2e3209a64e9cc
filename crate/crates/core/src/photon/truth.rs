//! Ground truth of the channel model, for checking the decoy estimates.

use super::channel::{ChannelSpec, PhaseFilter};
use super::response::drift_quadrature;

/// Single-detector response to a single photon reaching the S-BSM through
/// an arm of transmittance `eta`.
pub fn single_photon_yield(eta: f64, dark: f64) -> f64 {
    eta * (1.0 - dark) + (1.0 - eta) * 2.0 * dark * (1.0 - dark)
}

/// Single-detector response to `k` photons from one side only, each
/// detected with probability `eta` and routed to either detector with
/// equal probability.
pub fn fock_yield(k: u32, eta: f64, dark: f64) -> f64 {
    let one_silent = (1.0 - dark) * (1.0 - eta / 2.0).powi(k as i32);
    let both_silent = (1.0 - dark).powi(2) * (1.0 - eta).powi(k as i32);
    2.0 * (one_silent - both_silent)
}

/// Single-click rate of a phase-randomised coherent pulse of intensity `mu`
/// against vacuum, as a Poisson mixture of [`fock_yield`].
pub fn one_sided_yield(mu: f64, eta: f64, dark: f64) -> f64 {
    let mut p = (-mu).exp();
    let mut sum = 0.0;
    let mut k = 0u32;
    loop {
        sum += p * fock_yield(k, eta, dark);
        k += 1;
        p *= mu / k as f64;
        if (k as f64) > mu && p < 1e-18 {
            break;
        }
    }
    sum
}

/// True single-photon quantities of a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonTruth {
    /// Yield of `|01>`: the photon comes from user j.
    pub s01: f64,
    /// Yield of `|10>`: the photon comes from user i.
    pub s10: f64,
    pub s1: f64,
    /// Wrong-detector single clicks per single-click, over kept decoy pairings.
    pub phase_error: f64,
}

pub fn single_photon_truth(ch: &ChannelSpec, filter: &PhaseFilter) -> SinglePhotonTruth {
    let (eta_i, eta_j) = ch.transmittance();
    let d = ch.dark_count;
    let s01 = single_photon_yield(eta_j, d);
    let s10 = single_photon_yield(eta_i, d);
    let eta = 0.5 * (eta_i + eta_j);
    // Interference contrast of a photon split over unequal arms.
    let balance = if eta > 0.0 { (eta_i * eta_j).sqrt() / eta } else { 0.0 };
    let quad = drift_quadrature(ch.residual_phase_std);

    let (mut wrong, mut kept) = (0.0, 0usize);
    for k in 0..filter.slices {
        let t = filter.slice_phase(k);
        if !filter.passes_phase(t, 0.0) {
            continue;
        }
        let sign = if filter.expected_detector(t, 0.0) == 0 { 1.0 } else { -1.0 };
        let w: f64 = quad
            .iter()
            .map(|&(phi, wt)| wt * 0.5 * (1.0 - sign * ch.visibility * balance * (t + phi).cos()))
            .sum();
        wrong += w;
        kept += 1;
    }
    let w = if kept > 0 { wrong / kept as f64 } else { 0.5 };
    let y1 = single_photon_yield(eta, d);
    let wrong_click = eta * w * (1.0 - d) + (1.0 - eta) * d * (1.0 - d);
    SinglePhotonTruth {
        s01,
        s10,
        s1: 0.5 * (s01 + s10),
        phase_error: if y1 > 0.0 { wrong_click / y1 } else { 0.5 },
    }
}
