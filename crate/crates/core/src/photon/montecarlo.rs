use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::channel::{ChannelSpec, PhaseFilter};
use super::response::ResponseTable;
use crate::sns::{Category, CategoryMap, DetectionTally, ProtocolParams, UserChoice};
use crate::{Error, Result};

/// Pulse pairs per shard; each shard owns one ChaCha stream.
pub const SHARD_PULSES: u64 = 1 << 24;

/// Sifted signal-window bits of both users, in detection order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RawKeyPair {
    pub bits_i: Vec<bool>,
    pub bits_j: Vec<bool>,
}

impl RawKeyPair {
    pub fn len(&self) -> usize {
        self.bits_i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits_i.is_empty()
    }

    pub fn push(&mut self, c: Category) {
        let (a, b) = key_bits(c);
        self.bits_i.push(a);
        self.bits_j.push(b);
    }

    pub fn error_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.bits_i[k] != self.bits_j[k]).collect()
    }

    pub fn qber(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.error_positions().len() as f64 / self.len() as f64)
    }

    /// Raw key with the given per-category detection counts in random order.
    pub fn from_counts(counts: &[(Category, u64)], rng: &mut impl Rng) -> Self {
        let mut key = RawKeyPair::default();
        for &(c, k) in counts {
            for _ in 0..k {
                key.push(c);
            }
        }
        key.shuffle(rng);
        key
    }

    fn shuffle(&mut self, rng: &mut impl Rng) {
        let mut order: Vec<u32> = (0..self.len() as u32).collect();
        order.shuffle(rng);
        let (a, b) = (&self.bits_i, &self.bits_j);
        let bits_i = order.iter().map(|&k| a[k as usize]).collect();
        let bits_j = order.iter().map(|&k| b[k as usize]).collect();
        self.bits_i = bits_i;
        self.bits_j = bits_j;
    }

    fn append(&mut self, mut other: RawKeyPair) {
        self.bits_i.append(&mut other.bits_i);
        self.bits_j.append(&mut other.bits_j);
    }
}

/// Key bits of a signal-window detection: user i encodes 1 by sending,
/// user j encodes 0 by sending.
pub fn key_bits(c: Category) -> (bool, bool) {
    (c.i == UserChoice::ZY, c.j != UserChoice::ZY)
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain {
            name: "N",
            value: 0.0,
            expected: "> 0",
        });
    }
    Ok(())
}

struct Sampler {
    /// Cumulative choice thresholds on a u32 draw.
    cut: [u32; 3],
    table: ResponseTable,
    slices: u32,
    /// `[delta] -> Some(expected detector)` for kept decoy pairings.
    kept: Vec<Option<usize>>,
}

impl Sampler {
    fn new(params: &ProtocolParams, ch: &ChannelSpec, filter: &PhaseFilter) -> Self {
        let mut acc = 0.0;
        let mut cut = [0u32; 3];
        for (k, c) in UserChoice::ALL[..3].iter().enumerate() {
            acc += c.probability(params);
            cut[k] = (acc * 4294967296.0).round().min(u32::MAX as f64) as u32;
        }
        let kept = (0..filter.slices)
            .map(|d| {
                let t = filter.slice_phase(d);
                filter.passes_phase(t, 0.0).then(|| filter.expected_detector(t, 0.0))
            })
            .collect();
        Sampler {
            cut,
            table: ResponseTable::new(params, ch, filter),
            slices: filter.slices,
            kept,
        }
    }

    #[inline]
    fn choice(&self, r: u32) -> UserChoice {
        let k = (r >= self.cut[0]) as usize + (r >= self.cut[1]) as usize + (r >= self.cut[2]) as usize;
        UserChoice::ALL[k]
    }

    fn run_shard(&self, seed: u64, shard: u64, pulses: u64) -> (ShardTally, RawKeyPair) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shard);
        let mut t = ShardTally::default();
        let mut key = RawKeyPair::default();
        for _ in 0..pulses {
            let r = rng.next_u64();
            let c = Category::new(self.choice(r as u32), self.choice((r >> 32) as u32));
            let d = rng.random_range(0..self.slices);
            let u: f64 = rng.random();
            t.sent[c.index()] += 1;

            let cell = self.table.get(c.i.intensity(), c.j.intensity(), d);
            let detector = if u < cell.only_d0 {
                Some(0)
            } else if u < cell.single() {
                Some(1)
            } else {
                None
            };
            let xx_kept = if c.i == UserChoice::XX && c.j == UserChoice::XX {
                self.kept[d as usize]
            } else {
                None
            };
            if let Some(expected) = xx_kept {
                t.xx_sent_accepted += 1;
                if let Some(k) = detector {
                    t.xx_accepted += 1;
                    t.xx_correct += (k == expected) as u64;
                }
            }
            if detector.is_some() {
                t.counts[c.index()] += 1;
                if c.is_key_window() {
                    key.push(c);
                }
            }
        }
        (t, key)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ShardTally {
    counts: [u64; Category::COUNT],
    sent: [u64; Category::COUNT],
    xx_accepted: u64,
    xx_correct: u64,
    xx_sent_accepted: u64,
}

impl ShardTally {
    fn merge(&mut self, o: &ShardTally) {
        for k in 0..Category::COUNT {
            self.counts[k] += o.counts[k];
            self.sent[k] += o.sent[k];
        }
        self.xx_accepted += o.xx_accepted;
        self.xx_correct += o.xx_correct;
        self.xx_sent_accepted += o.xx_sent_accepted;
    }

    fn into_tally(self, n: u64) -> DetectionTally {
        let to_map = |a: [u64; Category::COUNT]| CategoryMap(a.map(|v| v as f64));
        DetectionTally {
            total_pulses: n as f64,
            counts: to_map(self.counts),
            sent: Some(to_map(self.sent)),
            xx_accepted: self.xx_accepted as f64,
            xx_correct: self.xx_correct as f64,
            xx_sent_accepted: self.xx_sent_accepted as f64,
        }
    }
}

/// Per-pulse sampling of `n` pulse pairs: source choices, announced phase
/// slices and detector outcomes. Shards run in parallel and merge in shard
/// order, so the result depends only on `seed`.
pub fn monte_carlo_session(
    params: &ProtocolParams,
    ch: &ChannelSpec,
    filter: &PhaseFilter,
    n: u64,
    seed: u64,
) -> Result<(RawKeyPair, DetectionTally)> {
    params.validate()?;
    ch.validate()?;
    filter.validate()?;
    check_n(n)?;
    let sampler = Sampler::new(params, ch, filter);
    let shards = n.div_ceil(SHARD_PULSES);
    let parts: Vec<(ShardTally, RawKeyPair)> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let pulses = SHARD_PULSES.min(n - s * SHARD_PULSES);
            sampler.run_shard(seed, s, pulses)
        })
        .collect();
    let mut total = ShardTally::default();
    let mut key = RawKeyPair::default();
    for (t, k) in parts {
        total.merge(&t);
        key.append(k);
    }
    Ok((key, total.into_tally(n)))
}

/// Samples the same session statistics as [`monte_carlo_session`] at the
/// level of (category, phase difference, outcome) cells. Pulses are i.i.d.,
/// so the cell counts are multinomial and the raw key is a uniformly random
/// ordering of the key-window detections. Cost is independent of `n`.
pub fn sample_session(
    params: &ProtocolParams,
    ch: &ChannelSpec,
    filter: &PhaseFilter,
    n: u64,
    seed: u64,
) -> Result<(RawKeyPair, DetectionTally)> {
    params.validate()?;
    ch.validate()?;
    filter.validate()?;
    check_n(n)?;
    let sampler = Sampler::new(params, ch, filter);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = ShardTally::default();

    let probs: Vec<f64> = Category::all().map(|c| c.probability(params)).collect();
    let sent = multinomial(&mut rng, n, &probs)?;
    let uniform = vec![1.0 / filter.slices as f64; filter.slices as usize];
    let mut key_counts = Vec::new();
    for c in Category::all() {
        let sent_c = sent[c.index()];
        t.sent[c.index()] = sent_c;
        let per_delta = multinomial(&mut rng, sent_c, &uniform)?;
        let is_xx = c.i == UserChoice::XX && c.j == UserChoice::XX;
        for (d, &m) in per_delta.iter().enumerate() {
            let cell = sampler.table.get(c.i.intensity(), c.j.intensity(), d as u32);
            let out = multinomial(&mut rng, m, &[cell.only_d0, cell.only_d1])?;
            let clicks = out[0] + out[1];
            t.counts[c.index()] += clicks;
            if let (true, Some(expected)) = (is_xx, sampler.kept[d]) {
                t.xx_sent_accepted += m;
                t.xx_accepted += clicks;
                t.xx_correct += out[expected];
            }
        }
        if c.is_key_window() {
            key_counts.push((c, t.counts[c.index()]));
        }
    }
    let key = RawKeyPair::from_counts(&key_counts, &mut rng);
    Ok((key, t.into_tally(n)))
}

/// Multinomial draw by sequential conditional binomials; probability mass not
/// covered by `probs` is the implicit last outcome.
fn multinomial(rng: &mut impl Rng, n: u64, probs: &[f64]) -> Result<Vec<u64>> {
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 || mass <= 0.0 {
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, q)
            .map_err(|e| Error::InvalidParams(format!("binomial({left}, {q}): {e}")))?
            .sample(rng);
        out[k] = draw;
        left -= draw;
        mass -= p;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ProtocolParams, ChannelSpec, PhaseFilter) {
        (
            ProtocolParams::operating_point_20db(),
            ChannelSpec::symmetric(20.0),
            PhaseFilter::default(),
        )
    }

    #[test]
    fn fixed_seed_reruns_are_identical() {
        let (p, ch, f) = setup();
        let a = monte_carlo_session(&p, &ch, &f, 200_000, 7).unwrap();
        let b = monte_carlo_session(&p, &ch, &f, 200_000, 7).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_session(&p, &ch, &f, 200_000, 8).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn cut_fiber_without_dark_counts_is_silent() {
        let (p, _, f) = setup();
        let ch = ChannelSpec {
            dark_count: 0.0,
            ..ChannelSpec::symmetric(f64::INFINITY)
        };
        let (key, t) = monte_carlo_session(&p, &ch, &f, 100_000, 1).unwrap();
        assert!(key.is_empty());
        assert_eq!(t.counts.total(), 0.0);
        assert_eq!(t.xx_accepted, 0.0);
        let (key, t) = sample_session(&p, &ch, &f, 100_000, 1).unwrap();
        assert!(key.is_empty());
        assert_eq!(t.counts.total(), 0.0);
    }

    #[test]
    fn raw_key_matches_tally() {
        let (p, ch, f) = setup();
        for (key, t) in [
            monte_carlo_session(&p, &ch, &f, 1_000_000, 3).unwrap(),
            sample_session(&p, &ch, &f, 1_000_000_000, 3).unwrap(),
        ] {
            t.validate().unwrap();
            assert_eq!(key.len() as f64, t.raw_key_length());
            assert_eq!(key.error_positions().len() as f64, t.raw_key_errors());
            assert_eq!(t.sent.unwrap().total(), t.total_pulses);
        }
    }

    #[test]
    fn key_bit_convention() {
        use UserChoice::*;
        assert_eq!(key_bits(Category::new(ZY, ZO)), (true, true));
        assert_eq!(key_bits(Category::new(ZO, ZY)), (false, false));
        assert_eq!(key_bits(Category::new(ZY, ZY)), (true, false));
        assert_eq!(key_bits(Category::new(ZO, ZO)), (false, true));
    }

    #[test]
    fn multinomial_conserves_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = multinomial(&mut rng, 1_000_000, &[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(out.iter().sum::<u64>(), 1_000_000);
        let out = multinomial(&mut rng, 1000, &[0.1, 0.1]).unwrap();
        assert!(out.iter().sum::<u64>() <= 1000);
    }
}
