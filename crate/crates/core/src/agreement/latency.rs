use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Recording, VerdictLevel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyOptions {
    /// Fraction of each channel's peak-to-peak range above its minimum.
    pub threshold_fraction: f64,
    /// Crossings closer than this to an event onset belong to that event.
    pub refractory_ms: f64,
    /// Channel pairs whose crossing times are compared. Empty = consecutive channels.
    pub pairs: Vec<(u8, u8)>,
    /// Largest acceptable delta; defaults to one sampling interval.
    pub tolerance_ms: Option<f64>,
}

impl Default for LatencyOptions {
    fn default() -> Self {
        Self {
            threshold_fraction: 0.5,
            refractory_ms: 500.0,
            pairs: Vec::new(),
            tolerance_ms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCrossing {
    pub channel: u8,
    /// `None` when the channel did not cross within the event window.
    pub time_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDelta {
    pub a: u8,
    pub b: u8,
    pub delta_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyEvent {
    pub event_id: usize,
    pub crossings: Vec<ChannelCrossing>,
    pub deltas: Vec<PairDelta>,
}

impl LatencyEvent {
    pub fn time_ms(&self, channel: u8) -> Option<f64> {
        self.crossings
            .iter()
            .find(|c| c.channel == channel)
            .and_then(|c| c.time_ms)
    }

    pub fn delta_ms(&self, a: u8, b: u8) -> Option<f64> {
        self.deltas
            .iter()
            .find(|d| (d.a, d.b) == (a, b) || (d.a, d.b) == (b, a))
            .and_then(|d| d.delta_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyTable {
    pub rate_hz: f64,
    pub sampling_interval_ms: f64,
    pub tolerance_ms: f64,
    pub pairs: Vec<(u8, u8)>,
    pub events: Vec<LatencyEvent>,
    pub max_delta_ms: Option<f64>,
    pub missing_crossings: usize,
    pub verdict: VerdictLevel,
}

fn rising_crossings(samples: &[f64], fraction: f64) -> Vec<usize> {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if hi <= lo {
        return Vec::new();
    }
    let threshold = lo + fraction * (hi - lo);
    (1..samples.len())
        .filter(|&i| samples[i] >= threshold && samples[i - 1] < threshold)
        .collect()
}

/// Threshold-crossing times of a common stimulus on several channels, grouped
/// into events, with pairwise time differences.
pub fn detect_latency(recording: &Recording, opts: &LatencyOptions) -> Result<LatencyTable> {
    let channels = recording.channels();
    if channels.len() < 2 {
        return Err(Error::invalid(
            "latency detection needs at least two channels",
        ));
    }
    if !(opts.threshold_fraction > 0.0 && opts.threshold_fraction < 1.0) {
        return Err(Error::invalid("threshold fraction must lie in (0, 1)"));
    }
    if !(opts.refractory_ms.is_finite() && opts.refractory_ms >= 0.0) {
        return Err(Error::invalid("refractory period must be >= 0"));
    }
    let pairs: Vec<(u8, u8)> = if opts.pairs.is_empty() {
        channels.windows(2).map(|w| (w[0].id, w[1].id)).collect()
    } else {
        opts.pairs.clone()
    };
    for &(a, b) in &pairs {
        for id in [a, b] {
            if recording.channel(id).is_none() {
                return Err(Error::invalid(format!(
                    "pair references missing channel {id}"
                )));
            }
        }
    }

    let rate = recording.rate_hz();
    let interval_ms = recording.sampling_interval_ms();
    let tolerance_ms = opts.tolerance_ms.unwrap_or(interval_ms);
    let refractory = (opts.refractory_ms * rate / 1000.0).ceil() as usize;
    let to_ms = |i: usize| i as f64 * 1000.0 / rate;

    let crossings: Vec<Vec<usize>> = channels
        .iter()
        .map(|c| rising_crossings(&c.samples, opts.threshold_fraction))
        .collect();
    let mut all: Vec<usize> = crossings.iter().flatten().copied().collect();
    all.sort_unstable();

    let mut events = Vec::new();
    let mut next = 0;
    while next < all.len() {
        let onset = all[next];
        let end = onset + refractory.max(1);
        let hits: Vec<(u8, Option<usize>)> = channels
            .iter()
            .zip(&crossings)
            .map(|(ch, xs)| (ch.id, xs.iter().copied().find(|&i| i >= onset && i < end)))
            .collect();
        let index_of = |id: u8| hits.iter().find(|h| h.0 == id).and_then(|h| h.1);
        // from the index difference, so a one-sample skew is exactly one interval
        let deltas = pairs
            .iter()
            .map(|&(a, b)| PairDelta {
                a,
                b,
                delta_ms: index_of(a)
                    .zip(index_of(b))
                    .map(|(ia, ib)| to_ms(ia.abs_diff(ib))),
            })
            .collect();
        let event_crossings = hits
            .iter()
            .map(|&(channel, i)| ChannelCrossing {
                channel,
                time_ms: i.map(to_ms),
            })
            .collect();
        events.push(LatencyEvent {
            event_id: events.len() + 1,
            crossings: event_crossings,
            deltas,
        });
        next = all.partition_point(|&i| i < end);
    }

    let max_delta_ms = events
        .iter()
        .flat_map(|e| e.deltas.iter().filter_map(|d| d.delta_ms))
        .reduce(f64::max);
    let missing_crossings = events
        .iter()
        .flat_map(|e| &e.crossings)
        .filter(|c| c.time_ms.is_none())
        .count();
    let verdict = if events.is_empty() || max_delta_ms.is_some_and(|d| d > tolerance_ms + 1e-9) {
        VerdictLevel::Fail
    } else if missing_crossings > 0 {
        VerdictLevel::Marginal
    } else {
        VerdictLevel::Pass
    };
    Ok(LatencyTable {
        rate_hz: rate,
        sampling_interval_ms: interval_ms,
        tolerance_ms,
        pairs,
        events,
        max_delta_ms,
        missing_crossings,
        verdict,
    })
}
