use super::channel::{clicks_from_fields, ChannelSpec, PhaseFilter};
use crate::sns::{Intensity, ProtocolParams};

/// Nodes per standard deviation side for the residual-phase average.
const DRIFT_NODES: usize = 60;
const DRIFT_SPAN: f64 = 6.0;

/// Outcome probabilities of one pulse pair, averaged over the residual drift.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellResponse {
    /// Only D0 clicks.
    pub only_d0: f64,
    /// Only D1 clicks.
    pub only_d1: f64,
}

impl CellResponse {
    pub fn single(&self) -> f64 {
        self.only_d0 + self.only_d1
    }

    pub fn only(&self, detector: usize) -> f64 {
        if detector == 0 {
            self.only_d0
        } else {
            self.only_d1
        }
    }
}

/// Discrete Gaussian weights for the residual drift; a single node at zero
/// when there is no drift.
pub(crate) fn drift_quadrature(std: f64) -> Vec<(f64, f64)> {
    if std <= 0.0 {
        return vec![(0.0, 1.0)];
    }
    let n = 2 * DRIFT_NODES + 1;
    let step = DRIFT_SPAN * std / DRIFT_NODES as f64;
    let mut nodes: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let x = (k as f64 - DRIFT_NODES as f64) * step;
            (x, (-0.5 * (x / std).powi(2)).exp())
        })
        .collect();
    let total: f64 = nodes.iter().map(|n| n.1).sum();
    for node in &mut nodes {
        node.1 /= total;
    }
    nodes
}

/// Response of every intensity pair at every announced phase difference.
///
/// Indexed `[l][r][delta]`, where `delta` counts slices of `theta_i - theta_j`.
#[derive(Debug, Clone)]
pub struct ResponseTable {
    pub slices: u32,
    cells: Vec<CellResponse>,
}

impl ResponseTable {
    pub fn new(params: &ProtocolParams, ch: &ChannelSpec, filter: &PhaseFilter) -> Self {
        let (eta_i, eta_j) = ch.transmittance();
        let quad = drift_quadrature(ch.residual_phase_std);
        let s = filter.slices;
        let mut cells = Vec::with_capacity(9 * s as usize);
        for l in Intensity::ALL {
            for r in Intensity::ALL {
                let (nu_i, nu_j) = (l.mean(params) * eta_i, r.mean(params) * eta_j);
                for d in 0..s {
                    let dtheta = filter.slice_phase(d);
                    let mut cell = CellResponse::default();
                    for &(phi, w) in &quad {
                        let (p0, p1) = clicks_from_fields(nu_i, nu_j, (dtheta + phi).cos(), ch.visibility, ch.dark_count);
                        cell.only_d0 += w * p0 * (1.0 - p1);
                        cell.only_d1 += w * p1 * (1.0 - p0);
                    }
                    cells.push(cell);
                }
            }
        }
        ResponseTable { slices: s, cells }
    }

    #[inline]
    pub fn get(&self, l: Intensity, r: Intensity, delta: u32) -> CellResponse {
        self.cells[(l.index() * 3 + r.index()) * self.slices as usize + delta as usize]
    }

    /// Single-click probability averaged over uniformly random slices.
    pub fn mean_single(&self, l: Intensity, r: Intensity) -> f64 {
        (0..self.slices).map(|d| self.get(l, r, d).single()).sum::<f64>() / self.slices as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_is_normalised_and_centred() {
        let q = drift_quadrature(0.2);
        let w: f64 = q.iter().map(|n| n.1).sum();
        let var: f64 = q.iter().map(|n| n.0 * n.0 * n.1).sum();
        assert!((w - 1.0).abs() < 1e-12);
        assert!((var - 0.04).abs() < 1e-6);
        // E[cos phi] = exp(-std^2 / 2)
        let c: f64 = q.iter().map(|n| n.0.cos() * n.1).sum();
        assert!((c - (-0.02f64).exp()).abs() < 1e-9);
    }
}
