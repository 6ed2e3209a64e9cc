use super::pairs::{AggregationMap, Category, CategoryMap, IntensityTable, UserChoice};
use super::params::ProtocolParams;
use crate::{Error, Result};

/// Single-detector response statistics of one key-generation session.
///
/// Counts are stored as `f64` so that expected tallies (fractional) and
/// sampled or ingested tallies (integral) share one type.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTally {
    /// Number of sent pulse pairs `N`.
    pub total_pulses: f64,
    /// Single-detector response counts per category.
    pub counts: CategoryMap,
    /// Sent pairings per category. `None` when not recorded; the expected
    /// values `N * P(category)` are used instead.
    pub sent: Option<CategoryMap>,
    /// Decoy-window `xx` detections passing the phase filter.
    pub xx_accepted: f64,
    /// Accepted `xx` detections that clicked the expected detector.
    pub xx_correct: f64,
    /// Sent `xx` pairings passing the phase filter, `N_x`.
    pub xx_sent_accepted: f64,
}

impl DetectionTally {
    pub fn empty(total_pulses: f64) -> Self {
        DetectionTally {
            total_pulses,
            counts: CategoryMap::default(),
            sent: None,
            xx_accepted: 0.0,
            xx_correct: 0.0,
            xx_sent_accepted: 0.0,
        }
    }

    pub fn count(&self, c: Category) -> f64 {
        self.counts.get(c)
    }

    /// Sent pairings per category, recorded or expected.
    pub fn sent_or_expected(&self, params: &ProtocolParams) -> CategoryMap {
        self.sent.unwrap_or_else(|| {
            let mut m = CategoryMap::default();
            for c in Category::all() {
                m.set(c, c.probability(params) * self.total_pulses);
            }
            m
        })
    }

    /// `n_lr` per intensity pair.
    pub fn detections(&self, map: AggregationMap) -> IntensityTable {
        map.aggregate(&self.counts)
    }

    /// `N_lr` per intensity pair.
    pub fn sent_pairs(&self, params: &ProtocolParams, map: AggregationMap) -> IntensityTable {
        map.aggregate(&self.sent_or_expected(params))
    }

    /// Detections in the key windows, i.e. the raw key length `n_t`.
    pub fn raw_key_length(&self) -> f64 {
        self.counts
            .iter()
            .filter(|(c, _)| c.is_key_window())
            .map(|(_, v)| v)
            .sum()
    }

    /// Errors in the raw key: both users sent, or both suppressed.
    pub fn raw_key_errors(&self) -> f64 {
        use UserChoice::*;
        self.count(Category::new(ZY, ZY)) + self.count(Category::new(ZO, ZO))
    }

    pub fn raw_key_qber(&self) -> Option<f64> {
        let nt = self.raw_key_length();
        (nt > 0.0).then(|| self.raw_key_errors() / nt)
    }

    /// Accepted decoy detections that clicked the wrong detector, `m_x`.
    pub fn xx_errors(&self) -> f64 {
        (self.xx_accepted - self.xx_correct).max(0.0)
    }

    /// Adds another tally of the same session layout. Associative and
    /// commutative, so shards can merge in any order.
    pub fn merge(&mut self, other: &DetectionTally) {
        self.total_pulses += other.total_pulses;
        self.counts.merge(&other.counts);
        self.sent = match (self.sent, other.sent) {
            (Some(mut a), Some(b)) => {
                a.merge(&b);
                Some(a)
            }
            _ => None,
        };
        self.xx_accepted += other.xx_accepted;
        self.xx_correct += other.xx_correct;
        self.xx_sent_accepted += other.xx_sent_accepted;
    }

    /// Checks the structural invariants of a tally.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.total_pulses > 0.0 && self.total_pulses.is_finite()) {
            return bad(format!("total pulses must be positive, got {}", self.total_pulses));
        }
        for (c, v) in self.counts.iter() {
            if !finite_nonneg(v) {
                return bad(format!("count {c} = {v} is not a non-negative number"));
            }
        }
        if let Some(sent) = &self.sent {
            for (c, v) in sent.iter() {
                if !finite_nonneg(v) {
                    return bad(format!("sent {c} = {v} is not a non-negative number"));
                }
                if self.counts.get(c) > v {
                    return bad(format!(
                        "count {c} = {} exceeds sent pairings {v}",
                        self.counts.get(c)
                    ));
                }
            }
            let total = sent.total();
            if total > self.total_pulses * (1.0 + 1e-12) {
                return bad(format!(
                    "sent pairings {total} exceed total pulses {}",
                    self.total_pulses
                ));
            }
        }
        for (name, v) in [
            ("xx_accepted", self.xx_accepted),
            ("xx_correct", self.xx_correct),
            ("xx_sent_accepted", self.xx_sent_accepted),
        ] {
            if !finite_nonneg(v) {
                return bad(format!("{name} = {v} is not a non-negative number"));
            }
        }
        let n_xx = self.count(Category::new(UserChoice::XX, UserChoice::XX));
        if self.xx_correct > self.xx_accepted || self.xx_accepted > n_xx {
            return bad(format!(
                "decoy filter counts must satisfy correct <= accepted <= n_xx, got {} / {} / {}",
                self.xx_correct, self.xx_accepted, n_xx
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sns::pairs::Intensity;

    fn small_tally() -> DetectionTally {
        let mut t = DetectionTally::empty(1000.0);
        for (label, v) in [("ZZyy", 3.0), ("ZZoy", 5.0), ("ZZyo", 6.0), ("ZZoo", 1.0), ("XXxx", 10.0)] {
            t.counts.set(label.parse().unwrap(), v);
        }
        t.xx_accepted = 4.0;
        t.xx_correct = 3.0;
        t.xx_sent_accepted = 8.0;
        t
    }

    #[test]
    fn raw_key_statistics() {
        let t = small_tally();
        assert_eq!(t.raw_key_length(), 15.0);
        assert_eq!(t.raw_key_errors(), 4.0);
        assert_eq!(t.xx_errors(), 1.0);
        t.validate().unwrap();
    }

    #[test]
    fn merge_is_additive() {
        let mut a = small_tally();
        let b = small_tally();
        a.merge(&b);
        assert_eq!(a.total_pulses, 2000.0);
        assert_eq!(a.raw_key_length(), 30.0);
        assert_eq!(a.xx_accepted, 8.0);
    }

    #[test]
    fn validate_catches_violations() {
        let mut t = small_tally();
        t.xx_correct = 5.0;
        assert!(t.validate().is_err());

        let mut t = small_tally();
        let mut sent = CategoryMap::default();
        sent.set("ZZyy".parse().unwrap(), 2.0);
        t.sent = Some(sent);
        assert!(t.validate().is_err());
    }

    #[test]
    fn aggregation_uses_source_composition() {
        let mut t = DetectionTally::empty(1.0);
        for (label, v) in [("ZXoo", 1.0), ("XZoo", 2.0), ("XXoo", 4.0), ("ZZoo", 8.0)] {
            t.counts.set(label.parse().unwrap(), v);
        }
        let n = t.detections(AggregationMap::SourceComposition);
        assert_eq!(n.get(Intensity::O, Intensity::O), 7.0);
        let n = t.detections(AggregationMap::VacuumWindowOnly);
        assert_eq!(n.get(Intensity::O, Intensity::O), 4.0);
    }
}
