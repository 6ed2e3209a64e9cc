use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Source intensities and window probabilities of the three-intensity SNS
/// protocol. Both users share one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    /// Mean photon number of the nominal vacuum source. Non-zero values model
    /// finite extinction of the intensity modulator.
    pub mu_o: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    pub p_o: f64,
    pub p_x: f64,
    pub p_y: f64,
    /// Probability of sending `mu_y` inside a signal window.
    pub eps_send: f64,
    /// Reference pulse intensity. Carried for simulation bookkeeping only.
    #[serde(default)]
    pub mu_ref: f64,
}

impl ProtocolParams {
    /// Builds a validated parameter set with `p_o = 1 - p_x - p_y`.
    pub fn new(mu_o: f64, mu_x: f64, mu_y: f64, p_x: f64, p_y: f64, eps_send: f64) -> Result<Self> {
        let params = ProtocolParams {
            mu_o,
            mu_x,
            mu_y,
            p_o: 1.0 - p_x - p_y,
            p_x,
            p_y,
            eps_send,
            mu_ref: 0.0,
        };
        params.validate()?;
        Ok(params)
    }

    /// Operating point used for 20 dB of total link loss.
    pub fn operating_point_20db() -> Self {
        ProtocolParams {
            mu_ref: 1.5,
            ..Self::new(0.0016, 0.01, 0.44, 0.23, 0.72, 0.25).expect("valid preset")
        }
    }

    /// Operating point used for 30 dB of total link loss.
    pub fn operating_point_30db() -> Self {
        ProtocolParams {
            mu_ref: 1.5,
            ..Self::new(0.0016, 0.01, 0.43, 0.36, 0.53, 0.25).expect("valid preset")
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mu_o,
            self.mu_x,
            self.mu_y,
            self.p_o,
            self.p_x,
            self.p_y,
            self.eps_send,
            self.mu_ref,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite protocol parameter".into()));
        }
        if !(0.0 <= self.mu_o && self.mu_o < self.mu_x && self.mu_x < self.mu_y) {
            return Err(Error::InvalidParams(format!(
                "intensities must satisfy 0 <= mu_o < mu_x < mu_y, got {} / {} / {}",
                self.mu_o, self.mu_x, self.mu_y
            )));
        }
        for (name, p) in [("p_o", self.p_o), ("p_x", self.p_x), ("p_y", self.p_y)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParams(format!("{name} = {p} is not a probability")));
            }
        }
        let sum = self.p_o + self.p_x + self.p_y;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "window probabilities sum to {sum}, expected 1"
            )));
        }
        if !(self.eps_send > 0.0 && self.eps_send < 1.0) {
            return Err(Error::InvalidParams(format!(
                "eps_send = {} must lie in (0, 1)",
                self.eps_send
            )));
        }
        if self.mu_ref < 0.0 {
            return Err(Error::InvalidParams("mu_ref must be non-negative".into()));
        }
        Ok(())
    }
}

/// Composable-security parameters of the finite-key analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityParams {
    pub eps_cor: f64,
    pub eps_pa: f64,
    /// Smooth-entropy chain-rule coefficient.
    pub eps_hat: f64,
    /// Failure probability of each Chernoff estimate, also used inside the
    /// AOPP chain.
    pub eps_chernoff: f64,
    /// Error-correction efficiency.
    pub f_ec: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        SecurityParams {
            eps_cor: 1e-10,
            eps_pa: 1e-10,
            eps_hat: 1e-10,
            eps_chernoff: 1e-10,
            f_ec: 1.1,
        }
    }
}

impl SecurityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("eps_cor", self.eps_cor),
            ("eps_pa", self.eps_pa),
            ("eps_hat", self.eps_hat),
            ("eps_chernoff", self.eps_chernoff),
        ] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidParams(format!("{name} = {p} must lie in (0, 1)")));
            }
        }
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "f_ec = {} must be at least 1",
                self.f_ec
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        ProtocolParams::operating_point_20db().validate().unwrap();
        ProtocolParams::operating_point_30db().validate().unwrap();
        let p = ProtocolParams::operating_point_20db();
        assert!((p.p_o - 0.05).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_ordering() {
        assert!(ProtocolParams::new(0.0, 0.3, 0.3, 0.2, 0.7, 0.25).is_err());
        assert!(ProtocolParams::new(0.02, 0.01, 0.3, 0.2, 0.7, 0.25).is_err());
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(ProtocolParams::new(0.0, 0.1, 0.4, 0.6, 0.6, 0.25).is_err());
        assert!(ProtocolParams::new(0.0, 0.1, 0.4, 0.2, 0.7, 1.0).is_err());
        let mut p = ProtocolParams::operating_point_20db();
        p.p_o = 0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn security_defaults() {
        let s = SecurityParams::default();
        s.validate().unwrap();
        assert!(SecurityParams { f_ec: 0.9, ..s }.validate().is_err());
        assert!(SecurityParams { eps_pa: 0.0, ..s }.validate().is_err());
    }
}
