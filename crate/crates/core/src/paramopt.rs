//! Search over source intensities and window probabilities for the highest
//! finite-key rate on a fixed channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::photon::{simulate_keyrate, ChannelSpec, Mode, SimulationConfig, FIBER_LOSS_DB_PER_KM};
use crate::sns::{KeyRateReport, ProtocolParams, SecurityParams};
use crate::{Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBounds {
    pub mu_x: Interval,
    pub mu_y: Interval,
    pub p_x: Interval,
    pub p_y: Interval,
    pub eps_send: Interval,
    /// Fixed intensity of the nominal vacuum source.
    pub mu_o: f64,
    #[serde(default)]
    pub mu_ref: f64,
    /// Smallest allowed `p_o = 1 - p_x - p_y`.
    pub min_p_o: f64,
    /// Coarse grid points per coordinate.
    pub grid_points: usize,
    /// Descent stops once a step falls below this fraction of the first.
    pub min_step_fraction: f64,
    /// Relative improvement per sweep below which steps shrink.
    pub rel_tol: f64,
    pub max_sweeps: usize,
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds {
            mu_x: Interval::new(0.002, 0.08),
            mu_y: Interval::new(0.1, 0.8),
            p_x: Interval::new(0.05, 0.6),
            p_y: Interval::new(0.2, 0.9),
            eps_send: Interval::new(0.05, 0.5),
            mu_o: 0.0016,
            mu_ref: 1.5,
            min_p_o: 0.01,
            grid_points: 3,
            min_step_fraction: 1.0 / 32.0,
            rel_tol: 1e-3,
            max_sweeps: 200,
        }
    }
}

/// Coordinates: `ln mu_x, ln mu_y, p_x, p_y, eps_send`.
type Point = [f64; 5];

impl ParamBounds {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("mu_x", self.mu_x),
            ("mu_y", self.mu_y),
            ("p_x", self.p_x),
            ("p_y", self.p_y),
            ("eps_send", self.eps_send),
        ];
        for (name, iv) in named {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo > 0.0 && iv.lo <= iv.hi) {
                return Err(Error::InvalidParams(format!("bad {name} interval [{}, {}]", iv.lo, iv.hi)));
            }
        }
        for (name, iv) in &named[2..] {
            if iv.hi >= 1.0 {
                return Err(Error::InvalidParams(format!("{name} interval must lie below 1")));
            }
        }
        if !(self.mu_o >= 0.0 && self.mu_o < self.mu_x.lo && self.mu_x.hi < self.mu_y.lo) {
            return Err(Error::InvalidParams(
                "intensity intervals must keep mu_o < mu_x < mu_y across the box".into(),
            ));
        }
        if !(self.min_p_o > 0.0 && self.min_p_o < 1.0 && self.p_x.lo + self.p_y.lo <= 1.0 - self.min_p_o) {
            return Err(Error::InvalidParams("no point of the box leaves p_o >= min_p_o".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidParams("grid needs at least 2 points per coordinate".into()));
        }
        if !(self.min_step_fraction > 0.0 && self.min_step_fraction < 1.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidParams("bad descent controls".into()));
        }
        Ok(())
    }

    fn box_lo_hi(&self) -> [(f64, f64); 5] {
        [
            (self.mu_x.lo.ln(), self.mu_x.hi.ln()),
            (self.mu_y.lo.ln(), self.mu_y.hi.ln()),
            (self.p_x.lo, self.p_x.hi),
            (self.p_y.lo, self.p_y.hi),
            (self.eps_send.lo, self.eps_send.hi),
        ]
    }

    fn to_params(&self, x: &Point) -> Option<ProtocolParams> {
        let p_x = self.p_x.clamp(x[2]);
        let p_y = self.p_y.clamp(x[3]);
        if 1.0 - p_x - p_y < self.min_p_o - 1e-12 {
            return None;
        }
        let mut params = ProtocolParams::new(
            self.mu_o,
            self.mu_x.clamp(x[0].exp()),
            self.mu_y.clamp(x[1].exp()),
            p_x,
            p_y,
            self.eps_send.clamp(x[4]),
        )
        .ok()?;
        params.mu_ref = self.mu_ref;
        Some(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best: ProtocolParams,
    pub report: KeyRateReport,
    /// Best rate on the coarse grid.
    pub grid_best_rate: f64,
    pub evaluations: usize,
}

struct Eval {
    x: Point,
    rate: f64,
}

/// Higher rate wins; equal rates go to the lexicographically smaller point.
fn better(a: &Eval, b: &Eval) -> bool {
    match a.rate.total_cmp(&b.rate) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            a.x.iter().zip(&b.x).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()) == Some(std::cmp::Ordering::Less)
        }
    }
}

struct Objective<'a> {
    bounds: &'a ParamBounds,
    ch: &'a ChannelSpec,
    n: f64,
    sec: &'a SecurityParams,
    cfg: SimulationConfig,
    calls: std::sync::atomic::AtomicUsize,
}

impl Objective<'_> {
    /// Rate at a point, `None` outside the simplex.
    fn rate(&self, x: &Point) -> Option<f64> {
        let params = self.bounds.to_params(x)?;
        self.calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        Some(
            simulate_keyrate(&params, self.ch, self.n, self.sec, &self.cfg)
                .map(|r| r.rate_per_pulse)
                .unwrap_or(0.0),
        )
    }
}

/// Coarse grid then coordinate descent with halving steps, restarted from
/// the best grid point and two points drawn with `seed`. The objective is
/// the expected-mode rate.
pub fn optimize_params(
    ch: &ChannelSpec,
    n: f64,
    sec: &SecurityParams,
    bounds: &ParamBounds,
    seed: u64,
) -> Result<OptimizeResult> {
    bounds.validate()?;
    ch.validate()?;
    sec.validate()?;
    let obj = Objective {
        bounds,
        ch,
        n,
        sec,
        cfg: SimulationConfig {
            mode: Mode::Expected,
            seed,
            ..Default::default()
        },
        calls: Default::default(),
    };
    let lohi = bounds.box_lo_hi();
    let g = bounds.grid_points;
    let axis = |d: usize, k: usize| lohi[d].0 + (lohi[d].1 - lohi[d].0) * k as f64 / (g - 1) as f64;
    let grid: Vec<Point> = (0..g.pow(5))
        .map(|mut idx| {
            let mut x = [0.0; 5];
            for (d, v) in x.iter_mut().enumerate() {
                *v = axis(d, idx % g);
                idx /= g;
            }
            x
        })
        .collect();
    let grid_best = grid
        .par_iter()
        .filter_map(|x| obj.rate(x).map(|rate| Eval { x: *x, rate }))
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .ok_or(Error::InfeasibleEverywhere)?;
    let grid_best_rate = grid_best.rate;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![grid_best.x];
    while starts.len() < 3 {
        let x: Point = std::array::from_fn(|d| rng.random_range(lohi[d].0..=lohi[d].1));
        if bounds.to_params(&x).is_some() {
            starts.push(x);
        }
    }
    let first_step: Point = std::array::from_fn(|d| (lohi[d].1 - lohi[d].0) / (g - 1) as f64 / 2.0);

    let mut best = grid_best;
    for start in starts {
        let Some(rate) = obj.rate(&start) else { continue };
        let found = descend(&obj, Eval { x: start, rate }, first_step, &lohi);
        if better(&found, &best) {
            best = found;
        }
    }
    if best.rate <= 0.0 {
        return Err(Error::InfeasibleEverywhere);
    }
    let params = bounds.to_params(&best.x).expect("best point is feasible");
    let report = simulate_keyrate(&params, ch, n, sec, &obj.cfg)?;
    Ok(OptimizeResult {
        best: params,
        report,
        grid_best_rate,
        evaluations: obj.calls.load(std::sync::atomic::Ordering::Relaxed),
    })
}

fn descend(obj: &Objective, mut cur: Eval, first_step: Point, lohi: &[(f64, f64); 5]) -> Eval {
    let b = obj.bounds;
    let mut step = first_step;
    for _ in 0..b.max_sweeps {
        let before = cur.rate;
        for d in 0..5 {
            for dir in [1.0, -1.0] {
                let mut x = cur.x;
                x[d] = (x[d] + dir * step[d]).clamp(lohi[d].0, lohi[d].1);
                if x[d] == cur.x[d] {
                    continue;
                }
                if let Some(rate) = obj.rate(&x) {
                    let cand = Eval { x, rate };
                    if cand.rate > cur.rate {
                        cur = cand;
                        break;
                    }
                }
            }
        }
        let gain = if cur.rate > 0.0 { (cur.rate - before) / cur.rate } else { 0.0 };
        if gain < b.rel_tol {
            if step[0] <= first_step[0] * b.min_step_fraction {
                break;
            }
            step.iter_mut().for_each(|s| *s /= 2.0);
        }
    }
    cur
}

/// Parameters used at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepParams {
    Fixed(ProtocolParams),
    /// Re-optimized per point; points with no positive rate report zero.
    Optimize(ParamBounds),
}

/// One line of a loss sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub loss_db: f64,
    pub km: f64,
    #[serde(rename = "R_per_pulse")]
    pub rate_per_pulse: f64,
    #[serde(rename = "R_bps")]
    pub rate_bps: f64,
    pub e1ph: f64,
    pub n1_prime: f64,
    pub feasible: bool,
}

/// Key rate over a range of total fiber losses, sorted by loss. Each point
/// reuses `template` with its loss split evenly over both arms.
pub fn sweep(
    template: &ChannelSpec,
    losses_db: &[f64],
    n: f64,
    sec: &SecurityParams,
    params: &SweepParams,
    cfg: &SimulationConfig,
) -> Result<Vec<SweepRow>> {
    let mut losses = losses_db.to_vec();
    losses.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(losses.len());
    for loss in losses {
        let ch = ChannelSpec {
            loss_i_db: loss / 2.0,
            loss_j_db: loss / 2.0,
            ..*template
        };
        let report = match params {
            SweepParams::Fixed(p) => Some(simulate_keyrate(p, &ch, n, sec, cfg)?),
            SweepParams::Optimize(bounds) => match optimize_params(&ch, n, sec, bounds, cfg.seed) {
                Ok(r) => Some(r.report),
                Err(Error::InfeasibleEverywhere) => None,
                Err(e) => return Err(e),
            },
        };
        rows.push(match report {
            Some(r) => SweepRow {
                loss_db: loss,
                km: loss / FIBER_LOSS_DB_PER_KM,
                rate_per_pulse: r.rate_per_pulse,
                rate_bps: r.rate_bps,
                e1ph: r.decoy.e1ph_upper,
                n1_prime: r.aopp.n1_prime,
                feasible: r.feasible,
            },
            None => SweepRow {
                loss_db: loss,
                km: loss / FIBER_LOSS_DB_PER_KM,
                rate_per_pulse: 0.0,
                rate_bps: 0.0,
                e1ph: f64::NAN,
                n1_prime: 0.0,
                feasible: false,
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ParamBounds {
        ParamBounds {
            grid_points: 2,
            min_step_fraction: 1.0 / 4.0,
            ..Default::default()
        }
    }

    #[test]
    fn bounds_validation() {
        ParamBounds::default().validate().unwrap();
        let bad = ParamBounds {
            mu_x: Interval::new(0.002, 0.2),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ParamBounds {
            p_x: Interval::new(0.5, 0.6),
            p_y: Interval::new(0.6, 0.9),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dominates_grid_and_is_deterministic() {
        let ch = ChannelSpec::symmetric(20.0);
        let sec = SecurityParams::default();
        let a = optimize_params(&ch, 1e10, &sec, &quick(), 7).unwrap();
        assert!(a.report.rate_per_pulse >= a.grid_best_rate);
        a.best.validate().unwrap();
        let b = optimize_params(&ch, 1e10, &sec, &quick(), 7).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.report.rate_per_pulse, b.report.rate_per_pulse);
    }

    #[test]
    fn sweep_is_sorted_and_non_increasing() {
        let rows = sweep(
            &ChannelSpec::default(),
            &[40.0, 10.0, 25.0, 60.0],
            1e10,
            &SecurityParams::default(),
            &SweepParams::Fixed(ProtocolParams::operating_point_20db()),
            &SimulationConfig::default(),
        )
        .unwrap();
        assert!(rows.windows(2).all(|w| w[0].loss_db < w[1].loss_db));
        assert!(rows.windows(2).all(|w| w[1].rate_per_pulse <= w[0].rate_per_pulse));
        assert_eq!(rows[1].km, 125.0);
        assert!(!rows[3].feasible);
    }

    #[test]
    fn beyond_cutoff_is_infeasible_everywhere() {
        let ch = ChannelSpec::symmetric(90.0);
        let r = optimize_params(&ch, 1e10, &SecurityParams::default(), &quick(), 1);
        assert!(matches!(r, Err(Error::InfeasibleEverywhere)));
    }
}
