//! Time-to-digital converter: start/stop logic and histogram accumulation.
//!
//! Starts come from a down-sampled clock: a tick at `k·rep_period + and_offset` is
//! passed on only if a herald detection falls within `±and_width/2` of it (AND gate).
//! Every stop detection within `±window` of a start adds one count at
//! `δt = t_stop − t_start`.

use serde::{Deserialize, Serialize};

use super::{Channel, CoincidenceHistogram, PhotonEvent};
use crate::error::{Error, Result};
use crate::linalg::Port;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartRule {
    pub herald: Channel,
    /// Analyzer port of the herald detector; `None` accepts every port.
    pub herald_port: Option<Port>,
    pub rep_period_ps: i64,
    pub and_offset_ps: i64,
    pub and_width_ps: i64,
}

impl StartRule {
    pub fn validate(&self) -> Result<()> {
        if self.rep_period_ps <= 0 {
            return Err(Error::invalid("clock period must be positive"));
        }
        if self.and_width_ps <= 0 || self.and_width_ps > self.rep_period_ps {
            return Err(Error::invalid("AND-gate width must be in (0, clock period]"));
        }
        if self.herald == Channel::Clock {
            return Err(Error::invalid("the clock cannot herald itself"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub channel: Channel,
    pub port: Option<Port>,
}

fn selects(e: &PhotonEvent, channel: Channel, port: Option<Port>) -> bool {
    e.channel == channel && (port.is_none() || e.port == port)
}

/// Gated clock ticks, as `CLOCK` events in time order. Each tick starts at most once;
/// the event copies bin, origin and memory outcome of the first herald that opened it.
pub fn tdc_starts(detections: &[PhotonEvent], rule: &StartRule) -> Result<Vec<PhotonEvent>> {
    rule.validate()?;
    let mut heralds: Vec<&PhotonEvent> = detections
        .iter()
        .filter(|e| selects(e, rule.herald, rule.herald_port))
        .collect();
    heralds.sort_by_key(|e| e.time_ps);
    let half = rule.and_width_ps / 2;
    let mut out: Vec<PhotonEvent> = Vec::new();
    let mut last_tick: Option<i64> = None;
    for h in heralds {
        let k = (h.time_ps - rule.and_offset_ps).div_euclid(rule.rep_period_ps);
        // The nearest tick is either k or k + 1.
        let tick = [k, k + 1]
            .into_iter()
            .map(|k| (k, k * rule.rep_period_ps + rule.and_offset_ps))
            .min_by_key(|(_, t)| (h.time_ps - t).abs())
            .expect("two candidates");
        if (h.time_ps - tick.1).abs() > half || last_tick == Some(tick.0) {
            continue;
        }
        last_tick = Some(tick.0);
        out.push(PhotonEvent {
            channel: Channel::Clock,
            time_ps: tick.1,
            cycle: tick.0.max(0) as u64,
            pair_id: None,
            bin: h.bin,
            origin: h.origin,
            memory_outcome: h.memory_outcome,
            port: None,
            joint_state: None,
        });
    }
    Ok(out)
}

/// Start/stop histogram over `[−window, window)`. An empty detection stream gives an
/// empty histogram with zero starts.
pub fn tdc_histogram(
    detections: &[PhotonEvent],
    start: &StartRule,
    stop: &StopRule,
    bin_width_ps: i64,
    window_ps: i64,
) -> Result<CoincidenceHistogram> {
    let starts = tdc_starts(detections, start)?;
    let mut stops: Vec<i64> = detections
        .iter()
        .filter(|e| selects(e, stop.channel, stop.port))
        .map(|e| e.time_ps)
        .collect();
    stops.sort_unstable();
    histogram_from_times(&starts, &stops, bin_width_ps, window_ps)
}

/// Accumulates stop times (sorted) around each start.
pub fn histogram_from_times(
    starts: &[PhotonEvent],
    sorted_stops: &[i64],
    bin_width_ps: i64,
    window_ps: i64,
) -> Result<CoincidenceHistogram> {
    let mut h = CoincidenceHistogram::new(bin_width_ps, window_ps)?;
    for s in starts {
        h.record_start();
        let t0 = s.time_ps;
        let lo = sorted_stops.partition_point(|&t| t < t0 - window_ps);
        for &t in &sorted_stops[lo..] {
            if !h.add(t - t0) {
                break;
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{Bin, MemoryOutcome, Origin};

    fn det(channel: Channel, time_ps: i64, cycle: u64) -> PhotonEvent {
        PhotonEvent {
            channel,
            time_ps,
            cycle,
            pair_id: Some(cycle),
            bin: Bin::Early,
            origin: Origin::Pair,
            memory_outcome: Some(MemoryOutcome::Recalled(0)),
            port: None,
            joint_state: None,
        }
    }

    fn er_rule() -> StartRule {
        StartRule {
            herald: Channel::Idler1535,
            herald_port: None,
            rep_period_ps: 12_500,
            and_offset_ps: 6_000,
            and_width_ps: 1_000,
        }
    }

    const SIGNAL: StopRule = StopRule {
        channel: Channel::Signal794,
        port: None,
    };

    fn peak_of(h: &CoincidenceHistogram) -> Vec<f64> {
        (0..h.len()).filter(|&k| h.counts()[k] > 0).map(|k| h.bin_start(k) as f64).collect()
    }

    #[test]
    fn stored_pair_gives_26_ns() {
        let c = 10u64;
        let t0 = c as i64 * 12_500;
        let events = vec![det(Channel::Idler1535, t0 + 6_000, c), det(Channel::Signal794, t0 + 32_000, c)];
        let h = tdc_histogram(&events, &er_rule(), &SIGNAL, 80, 100_000).unwrap();
        assert_eq!(h.starts(), 1);
        assert_eq!(h.coincidence_rate(26_000.0, 500.0).unwrap(), 1);
        assert_eq!(h.total(), 1);
    }

    #[test]
    fn transmitted_signal_gives_minus_6_ns() {
        let t0 = 3 * 12_500;
        let events = vec![det(Channel::Idler1535, t0 + 6_000, 3), det(Channel::Signal794, t0, 3)];
        let h = tdc_histogram(&events, &er_rule(), &SIGNAL, 80, 100_000).unwrap();
        assert_eq!(h.coincidence_rate(-6_000.0, 500.0).unwrap(), 1);
    }

    #[test]
    fn independent_pairs_land_on_rep_grid() {
        let events = vec![
            det(Channel::Idler1535, 5 * 12_500 + 6_000, 5),
            det(Channel::Signal794, 6 * 12_500 + 32_000, 6),
            det(Channel::Signal794, 7 * 12_500 + 32_000, 7),
        ];
        let h = tdc_histogram(&events, &er_rule(), &SIGNAL, 80, 100_000).unwrap();
        assert_eq!(peak_of(&h), vec![26_000.0 + 12_480.0, 26_000.0 + 24_960.0]);
        assert_eq!(h.coincidence_rate(38_500.0, 500.0).unwrap(), 1);
        assert_eq!(h.coincidence_rate(51_000.0, 500.0).unwrap(), 1);
    }

    #[test]
    fn heralds_outside_gate_do_not_start() {
        let events = vec![
            det(Channel::Idler1535, 12_500, 1),
            det(Channel::Idler1535, 12_500 + 6_000 + 600, 1),
            det(Channel::Signal794, 30_000, 1),
        ];
        assert_eq!(tdc_starts(&events, &er_rule()).unwrap().len(), 0);
    }

    #[test]
    fn one_start_per_tick() {
        let events = vec![
            det(Channel::Idler1535, 18_400, 1),
            det(Channel::Idler1535, 18_600, 1),
        ];
        let s = tdc_starts(&events, &er_rule()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].channel, s[0].time_ps, s[0].cycle), (Channel::Clock, 18_500, 1));
    }

    #[test]
    fn port_filters() {
        let mut a = det(Channel::Idler1535, 6_000, 0);
        a.port = Some(Port::Minus);
        let rule = StartRule {
            herald_port: Some(Port::Plus),
            ..er_rule()
        };
        assert!(tdc_starts(&[a.clone()], &rule).unwrap().is_empty());
        a.port = Some(Port::Plus);
        assert_eq!(tdc_starts(&[a], &rule).unwrap().len(), 1);
    }

    #[test]
    fn empty_stream_is_empty_histogram() {
        let h = tdc_histogram(&[], &er_rule(), &SIGNAL, 80, 100_000).unwrap();
        assert_eq!((h.starts(), h.total()), (0, 0));
    }

    #[test]
    fn unsorted_input_is_accepted() {
        let mut events = vec![
            det(Channel::Signal794, 10 * 12_500 + 32_000, 10),
            det(Channel::Signal794, 2 * 12_500 + 32_000, 2),
            det(Channel::Idler1535, 10 * 12_500 + 6_000, 10),
            det(Channel::Idler1535, 2 * 12_500 + 6_000, 2),
        ];
        let a = tdc_histogram(&events, &er_rule(), &SIGNAL, 80, 100_000).unwrap();
        events.sort_by_key(|e| e.time_ps);
        let b = tdc_histogram(&events, &er_rule(), &SIGNAL, 80, 100_000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.coincidence_rate(26_000.0, 500.0).unwrap(), 2);
    }
}
