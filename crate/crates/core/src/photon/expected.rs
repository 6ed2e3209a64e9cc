use super::channel::{ChannelSpec, PhaseFilter};
use super::response::ResponseTable;
use crate::sns::{Category, CategoryMap, DetectionTally, ProtocolParams, UserChoice};
use crate::{Error, Result};

/// Expected detection statistics of a session of `n` pulse pairs.
///
/// The compensation is assumed to estimate zero drift, so the filter keeps
/// the pairings whose announced phases match; any residual drift only
/// degrades their interference.
pub fn expected_tally(params: &ProtocolParams, ch: &ChannelSpec, filter: &PhaseFilter, n: f64) -> Result<DetectionTally> {
    params.validate()?;
    ch.validate()?;
    filter.validate()?;
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Domain {
            name: "N",
            value: n,
            expected: "> 0",
        });
    }
    let table = ResponseTable::new(params, ch, filter);
    Ok(tally_from_table(params, filter, &table, n))
}

pub(crate) fn tally_from_table(params: &ProtocolParams, filter: &PhaseFilter, table: &ResponseTable, n: f64) -> DetectionTally {
    let mut counts = CategoryMap::default();
    let mut sent = CategoryMap::default();
    for c in Category::all() {
        let big_n = n * c.probability(params);
        sent.set(c, big_n);
        counts.set(c, big_n * table.mean_single(c.i.intensity(), c.j.intensity()));
    }

    let xx = Category::new(UserChoice::XX, UserChoice::XX);
    let per_delta = n * xx.probability(params) / filter.slices as f64;
    let (mut sent_acc, mut acc, mut cor) = (0.0, 0.0, 0.0);
    for d in 0..filter.slices {
        let dtheta = filter.slice_phase(d);
        if !filter.passes_phase(dtheta, 0.0) {
            continue;
        }
        let cell = table.get(xx.i.intensity(), xx.j.intensity(), d);
        sent_acc += per_delta;
        acc += per_delta * cell.single();
        cor += per_delta * cell.only(filter.expected_detector(dtheta, 0.0));
    }

    DetectionTally {
        total_pulses: n,
        counts,
        sent: Some(sent),
        xx_accepted: acc,
        xx_correct: cor,
        xx_sent_accepted: sent_acc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_signal_yield_matches_integration() {
        // No loss, no dark counts: single-click rate of yy pairs against a
        // direct midpoint integration over the relative phase.
        let p = ProtocolParams::operating_point_20db();
        let ch = ChannelSpec {
            detector_efficiency: 1.0,
            dark_count: 0.0,
            visibility: 1.0,
            ..ChannelSpec::symmetric(0.0)
        };
        let filter = PhaseFilter::default();
        let t = expected_tally(&p, &ch, &filter, 1e10).unwrap();
        let zz = Category::new(UserChoice::ZY, UserChoice::ZY);
        let rate = t.count(zz) / t.sent.unwrap().get(zz);

        let mu = p.mu_y;
        let mut oracle = 0.0;
        for k in 0..16 {
            let d = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            let m0 = mu * (1.0 + d.cos());
            let m1 = mu * (1.0 - d.cos());
            oracle += (1.0 - (-m0).exp()) * (-m1).exp() + (1.0 - (-m1).exp()) * (-m0).exp();
        }
        oracle /= 16.0;
        assert!((rate - oracle).abs() < 1e-9, "{rate} vs {oracle}");
    }

    #[test]
    fn xx_acceptance_uses_one_eighth_of_pairings() {
        let p = ProtocolParams::operating_point_20db();
        let t = expected_tally(&p, &ChannelSpec::symmetric(20.0), &PhaseFilter::default(), 1e10).unwrap();
        let expect = 1e10 * p.p_x * p.p_x / 8.0;
        assert!((t.xx_sent_accepted - expect).abs() < 1e-3);
        assert!(t.xx_correct < t.xx_accepted);
        t.validate().unwrap();
    }

    #[test]
    fn dark_count_floor() {
        let mut p = ProtocolParams::operating_point_20db();
        p.mu_o = 0.0;
        let ch = ChannelSpec::symmetric(20.0);
        let t = expected_tally(&p, &ch, &PhaseFilter::default(), 1e10).unwrap();
        let oo = Category::new(UserChoice::XO, UserChoice::XO);
        let rate = t.count(oo) / t.sent.unwrap().get(oo);
        let d = ch.dark_count;
        assert!((rate - 2.0 * d * (1.0 - d)).abs() < 1e-20);
        assert!(rate >= d);
    }

    #[test]
    fn signal_window_qber_at_30db() {
        let p = ProtocolParams::operating_point_30db();
        let ch = ChannelSpec {
            mu_excess_loss_db: 10.0 * 2f64.log10() + 1.0,
            ..ChannelSpec::symmetric(30.0)
        };
        let t = expected_tally(&p, &ch, &PhaseFilter::default(), 1e10).unwrap();
        let q = t.raw_key_qber().unwrap();
        assert!((0.24..=0.31).contains(&q), "{q}");
    }
}
