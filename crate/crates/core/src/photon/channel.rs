use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fiber attenuation used to convert distances to link loss.
pub const FIBER_LOSS_DB_PER_KM: f64 = 0.2;

/// Residual drift (rad) that reproduces an accepted decoy error rate of about
/// 7.7% at the default visibility.
pub const DEFAULT_RESIDUAL_PHASE_STD: f64 = 0.47;

/// Optical path from two users to one S-BSM, plus the detectors behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub loss_i_db: f64,
    pub loss_j_db: f64,
    pub detector_efficiency: f64,
    /// Dark-count probability per pulse per detector.
    pub dark_count: f64,
    pub visibility: f64,
    /// Extra loss inside the measurement unit, applied to each arm.
    #[serde(default)]
    pub mu_excess_loss_db: f64,
    /// Standard deviation (rad) of the phase drift left after compensation.
    #[serde(default)]
    pub residual_phase_std: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec {
            loss_i_db: 0.0,
            loss_j_db: 0.0,
            detector_efficiency: 0.45,
            dark_count: 8e-8,
            visibility: 0.9447,
            mu_excess_loss_db: 0.0,
            residual_phase_std: DEFAULT_RESIDUAL_PHASE_STD,
        }
    }
}

impl ChannelSpec {
    /// Total user-to-user loss split evenly over the two arms.
    pub fn symmetric(total_loss_db: f64) -> Self {
        ChannelSpec {
            loss_i_db: total_loss_db / 2.0,
            loss_j_db: total_loss_db / 2.0,
            ..Default::default()
        }
    }

    /// Fiber of `total_km` between the two users, node in the middle.
    pub fn symmetric_km(total_km: f64) -> Self {
        Self::symmetric(total_km * FIBER_LOSS_DB_PER_KM)
    }

    pub fn total_loss_db(&self) -> f64 {
        self.loss_i_db + self.loss_j_db
    }

    /// Arm transmittances including detector efficiency, `(eta_i, eta_j)`.
    pub fn transmittance(&self) -> (f64, f64) {
        let t = |loss: f64| self.detector_efficiency * 10f64.powf(-(loss + self.mu_excess_loss_db) / 10.0);
        (t(self.loss_i_db), t(self.loss_j_db))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("loss_i_db", self.loss_i_db),
            ("loss_j_db", self.loss_j_db),
            ("mu_excess_loss_db", self.mu_excess_loss_db),
            ("residual_phase_std", self.residual_phase_std),
        ] {
            // Infinite loss is allowed and means a cut fiber.
            if v.is_nan() || v < 0.0 {
                return Err(Error::Domain {
                    name,
                    value: v,
                    expected: ">= 0",
                });
            }
        }
        for (name, v) in [
            ("detector_efficiency", self.detector_efficiency),
            ("dark_count", self.dark_count),
            ("visibility", self.visibility),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    expected: "[0, 1]",
                });
            }
        }
        Ok(())
    }
}

/// Click probabilities `(p_d0, p_d1)` of the two S-BSM detectors for coherent
/// pulses of intensities `mu_i`, `mu_j` and relative phase `delta`.
pub fn click_probabilities(mu_i: f64, mu_j: f64, delta: f64, ch: &ChannelSpec) -> (f64, f64) {
    let (eta_i, eta_j) = ch.transmittance();
    clicks_from_fields(mu_i * eta_i, mu_j * eta_j, delta.cos(), ch.visibility, ch.dark_count)
}

#[inline]
pub(crate) fn clicks_from_fields(nu_i: f64, nu_j: f64, cos_delta: f64, visibility: f64, dark: f64) -> (f64, f64) {
    let cross = 2.0 * visibility * (nu_i * nu_j).sqrt() * cos_delta;
    let m0 = ((nu_i + nu_j + cross) / 2.0).max(0.0);
    let m1 = ((nu_i + nu_j - cross) / 2.0).max(0.0);
    let click = |m: f64| dark - (1.0 - dark) * (-m).exp_m1();
    (click(m0), click(m1))
}

/// Probability that exactly one of the two detectors clicks.
#[inline]
pub fn single_click(p0: f64, p1: f64) -> f64 {
    p0 * (1.0 - p1) + p1 * (1.0 - p0)
}

/// Post-selection of decoy-window pairings on the announced phase slices:
/// `|cos(theta_i - theta_j - phi)| >= cos(pi / slices)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseFilter {
    pub slices: u32,
}

impl Default for PhaseFilter {
    fn default() -> Self {
        PhaseFilter { slices: 16 }
    }
}

impl PhaseFilter {
    pub fn new(slices: u32) -> Result<Self> {
        let f = PhaseFilter { slices };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slices < 2 || self.slices % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "phase slices must be even and >= 2, got {}",
                self.slices
            )));
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        (PI / self.slices as f64).cos()
    }

    /// `1 - threshold`, the small margin admitted around the matched phases.
    pub fn lambda(&self) -> f64 {
        1.0 - self.threshold()
    }

    pub fn slice_phase(&self, k: u32) -> f64 {
        2.0 * PI * k as f64 / self.slices as f64
    }

    /// Whether the pairing of slices `a` (user i) and `b` (user j) is kept
    /// under estimated drift `phi`.
    pub fn passes(&self, a: u32, b: u32, phi: f64) -> bool {
        self.passes_phase(self.slice_phase(a) - self.slice_phase(b), phi)
    }

    pub fn passes_phase(&self, dtheta: f64, phi: f64) -> bool {
        // Guard against round-off exactly at the boundary slices.
        (dtheta - phi).cos().abs() >= self.threshold() - 1e-12
    }

    /// Detector expected to click for a kept pairing: `0` for D0, `1` for D1.
    pub fn expected_detector(&self, dtheta: f64, phi: f64) -> usize {
        if (dtheta - phi).cos() > 0.0 {
            0
        } else {
            1
        }
    }

    /// Fraction of the `slices x slices` grid that passes at drift `phi`.
    pub fn pass_fraction(&self, phi: f64) -> f64 {
        let s = self.slices;
        let kept = (0..s)
            .flat_map(|a| (0..s).map(move |b| (a, b)))
            .filter(|&(a, b)| self.passes(a, b, phi))
            .count();
        kept as f64 / (s * s) as f64
    }
}

/// Pulse layout of one modulation frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub signal: u32,
    pub reference: u32,
    pub vacuum: u32,
    pub clock_hz: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec {
            signal: 400,
            reference: 600,
            vacuum: 24,
            clock_hz: 1e8,
        }
    }
}

impl FrameSpec {
    pub fn frame_length(&self) -> u32 {
        self.signal + self.reference + self.vacuum
    }

    pub fn signal_duty(&self) -> f64 {
        self.signal as f64 / self.frame_length() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.signal == 0 || !(self.clock_hz > 0.0) {
            return Err(Error::InvalidParams("frame needs signal slots and a positive clock".into()));
        }
        Ok(())
    }

    pub fn conversion(&self) -> crate::sns::RateConversion {
        crate::sns::RateConversion {
            clock_hz: self.clock_hz,
            signal_duty: self.signal_duty(),
        }
    }
}
