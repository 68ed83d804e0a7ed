//! Core domain types and the descriptive-statistics kernel shared by every analysis.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest channel index on the acquisition device.
pub const MAX_CHANNEL_ID: u8 = 8;

/// Amplitude unit of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    #[serde(rename = "mV")]
    MilliVolt,
    #[serde(rename = "raw-counts")]
    RawCounts,
    #[serde(rename = "V")]
    Volt,
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::MilliVolt => "mV",
            Units::RawCounts => "raw-counts",
            Units::Volt => "V",
        })
    }
}

impl FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mV" | "mv" => Ok(Units::MilliVolt),
            "raw-counts" | "counts" => Ok(Units::RawCounts),
            "V" | "v" => Ok(Units::Volt),
            other => Err(Error::invalid(format!("unknown unit {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSeries {
    pub id: u8,
    pub samples: Vec<f64>,
}

impl ChannelSeries {
    pub fn new(id: u8, samples: Vec<f64>) -> Self {
        Self { id, samples }
    }
}

/// Uniformly sampled multichannel time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    channels: Vec<ChannelSeries>,
    rate_hz: f64,
    units: Units,
}

impl Recording {
    /// Validates channel ids (1..=8, unique), equal lengths, finite samples and a positive rate.
    pub fn new(channels: Vec<ChannelSeries>, rate_hz: f64, units: Units) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::invalid(format!(
                "sampling rate must be > 0, got {rate_hz}"
            )));
        }
        let first = channels
            .first()
            .ok_or_else(|| Error::empty("recording has no channels"))?;
        let len = first.samples.len();
        if len == 0 {
            return Err(Error::empty("recording has no samples"));
        }
        let mut seen = [false; MAX_CHANNEL_ID as usize + 1];
        for ch in &channels {
            if ch.id == 0 || ch.id > MAX_CHANNEL_ID {
                return Err(Error::invalid(format!(
                    "channel id {} outside 1..={MAX_CHANNEL_ID}",
                    ch.id
                )));
            }
            if std::mem::replace(&mut seen[ch.id as usize], true) {
                return Err(Error::invalid(format!("duplicate channel id {}", ch.id)));
            }
            if ch.samples.len() != len {
                return Err(Error::LengthMismatch {
                    left: len,
                    right: ch.samples.len(),
                });
            }
            if ch.samples.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("channel {}", ch.id)));
            }
        }
        Ok(Self {
            channels,
            rate_hz,
            units,
        })
    }

    /// Single-channel convenience constructor (channel id 1).
    pub fn single(samples: Vec<f64>, rate_hz: f64, units: Units) -> Result<Self> {
        Self::new(vec![ChannelSeries::new(1, samples)], rate_hz, units)
    }

    pub fn channels(&self) -> &[ChannelSeries] {
        &self.channels
    }

    pub fn channel(&self, id: u8) -> Option<&ChannelSeries> {
        self.channels.iter().find(|c| c.id == id)
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn units(&self) -> Units {
        self.units
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz
    }

    pub fn sampling_interval_ms(&self) -> f64 {
        1000.0 / self.rate_hz
    }
}

/// Mean, population SD, coefficient of variation and mean successive variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// `None` when the mean is zero.
    pub cv_percent: Option<f64>,
    /// `100 · mean(|x[i+1] − x[i]|) / |mean|`; `None` when the mean is zero.
    pub mean_variation_percent: Option<f64>,
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

fn sum_sq_dev(samples: &[f64]) -> f64 {
    let m = mean(samples);
    samples.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Standard deviation dividing by N.
pub fn population_sd(samples: &[f64]) -> f64 {
    (sum_sq_dev(samples) / samples.len() as f64).sqrt()
}

/// Standard deviation dividing by N − 1; zero for a single sample.
pub fn sample_sd(samples: &[f64]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    (sum_sq_dev(samples) / (samples.len() - 1) as f64).sqrt()
}

pub(crate) fn check_finite(samples: &[f64], what: &str) -> Result<()> {
    if samples.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn descriptive_stats(samples: &[f64]) -> Result<DescriptiveStats> {
    if samples.is_empty() {
        return Err(Error::empty(
            "descriptive statistics need at least one sample",
        ));
    }
    check_finite(samples, "descriptive statistics input")?;
    let m = mean(samples);
    let sd = population_sd(samples);
    let (cv_percent, mean_variation_percent) = if m == 0.0 {
        (None, None)
    } else {
        let succ = if samples.len() > 1 {
            samples.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
                / (samples.len() - 1) as f64
        } else {
            0.0
        };
        (Some(100.0 * sd / m.abs()), Some(100.0 * succ / m.abs()))
    };
    Ok(DescriptiveStats {
        n: samples.len(),
        mean: m,
        sd,
        cv_percent,
        mean_variation_percent,
    })
}

/// Rounds half away from zero at `dp` decimals, after snapping away binary
/// representation noise (so 20.115 rounds to 20.12, not 20.11).
pub fn round_half_up(x: f64, dp: u32) -> f64 {
    let scale = 10f64.powi(dp as i32);
    let scaled = x * scale;
    let snapped = (scaled * 1e6).round() / 1e6;
    snapped.round() / scale
}

/// Fixed-decimal formatting with [`round_half_up`] semantics.
pub fn fmt_dp(x: f64, dp: u32) -> String {
    format!("{:.*}", dp as usize, round_half_up(x, dp))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VerdictLevel {
    Pass,
    Marginal,
    Fail,
}

impl VerdictLevel {
    /// Worst level of an iterator, `Pass` when empty.
    pub fn worst(levels: impl IntoIterator<Item = VerdictLevel>) -> VerdictLevel {
        levels.into_iter().max().unwrap_or(VerdictLevel::Pass)
    }
}

impl fmt::Display for VerdictLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictLevel::Pass => "PASS",
            VerdictLevel::Marginal => "MARGINAL",
            VerdictLevel::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub level: VerdictLevel,
    pub value: f64,
    pub limit: f64,
}

/// PASS iff `value <= limit`, MARGINAL iff `limit < value <= limit · multiplier`, FAIL otherwise.
pub fn verdict(value: f64, limit: f64, marginal_multiplier: f64) -> Result<Verdict> {
    if !value.is_finite() {
        return Err(Error::NonFinite("verdict value".into()));
    }
    if !(limit.is_finite() && limit > 0.0) {
        return Err(Error::invalid(format!("limit must be > 0, got {limit}")));
    }
    if !(marginal_multiplier.is_finite() && marginal_multiplier >= 1.0) {
        return Err(Error::invalid(format!(
            "marginal multiplier must be >= 1, got {marginal_multiplier}"
        )));
    }
    let level = if value <= limit {
        VerdictLevel::Pass
    } else if value <= limit * marginal_multiplier {
        VerdictLevel::Marginal
    } else {
        VerdictLevel::Fail
    };
    Ok(Verdict {
        level,
        value,
        limit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldRange {
    pub low: f64,
    pub high: f64,
}

/// Regulatory limits and verdict bands. Every field falls back to its default
/// when missing from a JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplianceThresholds {
    pub leakage_limit_ua: f64,
    pub auxiliary_limit_ua: f64,
    pub marginal_multiplier: f64,
    pub petg_yield_mpa: YieldRange,
    pub body_resistance_ohm: f64,
    /// Minimum r² of the stress–strain fit for an elastic verdict.
    pub elastic_r2_min: f64,
    /// Residual strain after unloading above which plastic deformation is flagged.
    pub residual_strain_limit: f64,
}

impl Default for ComplianceThresholds {
    fn default() -> Self {
        Self {
            leakage_limit_ua: 10.0,
            auxiliary_limit_ua: 100.0,
            marginal_multiplier: 2.0,
            petg_yield_mpa: YieldRange {
                low: 40.0,
                high: 50.0,
            },
            body_resistance_ohm: 1000.0,
            elastic_r2_min: 0.98,
            residual_strain_limit: 0.005,
        }
    }
}

impl ComplianceThresholds {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("leakage_limit_ua", self.leakage_limit_ua),
            ("auxiliary_limit_ua", self.auxiliary_limit_ua),
            ("petg_yield_mpa.low", self.petg_yield_mpa.low),
            ("petg_yield_mpa.high", self.petg_yield_mpa.high),
            ("body_resistance_ohm", self.body_resistance_ohm),
            ("residual_strain_limit", self.residual_strain_limit),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.marginal_multiplier.is_finite() && self.marginal_multiplier >= 1.0) {
            return Err(Error::invalid("marginal_multiplier must be >= 1"));
        }
        if self.petg_yield_mpa.low > self.petg_yield_mpa.high {
            return Err(Error::invalid("petg_yield_mpa.low must not exceed high"));
        }
        if !(0.0..=1.0).contains(&self.elastic_r2_min) {
            return Err(Error::invalid("elastic_r2_min must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn leakage_rows_match_published_cells() {
        let s = descriptive_stats(&[15.36, 15.36, 16.98, 20.62]).unwrap();
        assert_eq!(fmt_dp(s.mean, 2), "17.08");
        assert_eq!(fmt_dp(s.sd, 2), "2.15");
        let s = descriptive_stats(&[17.63, 21.83, 20.38, 20.62]).unwrap();
        assert_eq!(fmt_dp(s.mean, 2), "20.12");
        assert_eq!(fmt_dp(s.sd, 2), "1.54");
    }

    #[test]
    fn hand_checked_deviation() {
        // deviations +-1.72, +-1.72, -0.10, 3.54
        let devs: [f64; 4] = [-1.72, -1.72, -0.10, 3.54];
        let by_hand = (devs.iter().map(|d| d * d).sum::<f64>() / 4.0).sqrt();
        let s = descriptive_stats(&[15.36, 15.36, 16.98, 20.62]).unwrap();
        assert!((s.sd - by_hand).abs() < 1e-9);
        assert!((s.sd - 2.148).abs() < 5e-4);
    }

    #[test]
    fn constant_input() {
        let s = descriptive_stats(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.cv_percent, Some(0.0));
        assert_eq!(s.mean_variation_percent, Some(0.0));
    }

    #[test]
    fn zero_mean_flags_cv_absent() {
        let s = descriptive_stats(&[-1.0, 1.0]).unwrap();
        assert_eq!(s.cv_percent, None);
        assert_eq!(s.sd, 1.0);
    }

    #[test]
    fn empty_and_non_finite_rejected() {
        assert!(matches!(descriptive_stats(&[]), Err(Error::Empty(_))));
        assert!(matches!(
            descriptive_stats(&[1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn mean_variation_formula() {
        // successive |diffs| 1, 2 -> mean 1.5, mean(x) = 2 -> 75 %
        let s = descriptive_stats(&[1.0, 2.0, 4.0, 1.0]).unwrap();
        let expected_succ = (1.0 + 2.0 + 3.0) / 3.0;
        assert!((s.mean_variation_percent.unwrap() - 100.0 * expected_succ / 2.0).abs() < 1e-12);
    }

    #[test]
    fn verdict_bands() {
        assert_eq!(verdict(9.9, 10.0, 2.0).unwrap().level, VerdictLevel::Pass);
        assert_eq!(verdict(10.0, 10.0, 2.0).unwrap().level, VerdictLevel::Pass);
        assert_eq!(
            verdict(17.08, 10.0, 2.0).unwrap().level,
            VerdictLevel::Marginal
        );
        assert_eq!(
            verdict(20.0, 10.0, 2.0).unwrap().level,
            VerdictLevel::Marginal
        );
        assert_eq!(verdict(25.0, 10.0, 2.0).unwrap().level, VerdictLevel::Fail);
        assert!(verdict(f64::INFINITY, 10.0, 2.0).is_err());
        assert!(verdict(1.0, 0.0, 2.0).is_err());
        assert!(verdict(1.0, 10.0, 0.5).is_err());
    }

    #[test]
    fn rounding_snaps_binary_noise() {
        assert_eq!(fmt_dp(20.115, 2), "20.12");
        assert_eq!(fmt_dp(80.46 / 4.0, 2), "20.12");
        assert_eq!(fmt_dp(2.1482, 2), "2.15");
        assert_eq!(fmt_dp(-1.005, 2), "-1.01");
        assert_eq!(fmt_dp(266.666, 1), "266.7");
    }

    #[test]
    fn thresholds_merge_over_defaults() {
        let t = ComplianceThresholds::from_json_str(r#"{"leakage_limit_ua": 50}"#).unwrap();
        assert_eq!(t.leakage_limit_ua, 50.0);
        assert_eq!(t.auxiliary_limit_ua, 100.0);
        assert_eq!(t.petg_yield_mpa.low, 40.0);
        assert!(ComplianceThresholds::from_json_str(r#"{"leakage_limit_ua": -1}"#).is_err());
        assert!(ComplianceThresholds::from_json_str(
            r#"{"petg_yield_mpa": {"low": 60, "high": 50}}"#
        )
        .is_err());
        assert!(ComplianceThresholds::from_json_str(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn recording_invariants() {
        let ok = Recording::new(
            vec![
                ChannelSeries::new(1, vec![1.0, 2.0]),
                ChannelSeries::new(2, vec![0.0, 0.0]),
            ],
            800.0,
            Units::MilliVolt,
        )
        .unwrap();
        assert_eq!(ok.len(), 2);
        assert!((ok.sampling_interval_ms() - 1.25).abs() < 1e-12);
        assert!(Recording::single(vec![1.0], 0.0, Units::Volt).is_err());
        assert!(Recording::single(vec![], 10.0, Units::Volt).is_err());
        assert!(Recording::new(
            vec![
                ChannelSeries::new(1, vec![1.0]),
                ChannelSeries::new(1, vec![1.0])
            ],
            10.0,
            Units::Volt
        )
        .is_err());
        assert!(Recording::new(
            vec![
                ChannelSeries::new(1, vec![1.0]),
                ChannelSeries::new(2, vec![1.0, 2.0])
            ],
            10.0,
            Units::Volt
        )
        .is_err());
        assert!(Recording::new(vec![ChannelSeries::new(9, vec![1.0])], 10.0, Units::Volt).is_err());
    }

    #[test]
    fn verdict_levels_order() {
        assert_eq!(
            VerdictLevel::worst([
                VerdictLevel::Pass,
                VerdictLevel::Fail,
                VerdictLevel::Marginal
            ]),
            VerdictLevel::Fail
        );
        assert_eq!(VerdictLevel::worst([]), VerdictLevel::Pass);
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut xs in prop::collection::vec(-1e3f64..1e3, 1..40), seed in any::<u64>()) {
            let a = descriptive_stats(&xs).unwrap();
            // deterministic shuffle
            let n = xs.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                xs.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = descriptive_stats(&xs).unwrap();
            prop_assert!((a.mean - b.mean).abs() <= 1e-9 * (1.0 + a.mean.abs()));
            prop_assert!((a.sd - b.sd).abs() <= 1e-9 * (1.0 + a.sd));
        }

        #[test]
        fn shift_moves_mean_only(xs in prop::collection::vec(-1e3f64..1e3, 1..40), c in -1e3f64..1e3) {
            let a = descriptive_stats(&xs).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let b = descriptive_stats(&shifted).unwrap();
            prop_assert!((b.mean - (a.mean + c)).abs() <= 1e-9 * (1.0 + a.mean.abs() + c.abs()));
            prop_assert!((a.sd - b.sd).abs() <= 1e-8 * (1.0 + a.sd));
        }

        #[test]
        fn scaling_keeps_cv(xs in prop::collection::vec(0.1f64..1e3, 1..40), k in 0.01f64..100.0) {
            let a = descriptive_stats(&xs).unwrap();
            let scaled: Vec<f64> = xs.iter().map(|x| x * k).collect();
            let b = descriptive_stats(&scaled).unwrap();
            let (ca, cb) = (a.cv_percent.unwrap(), b.cv_percent.unwrap());
            prop_assert!((ca - cb).abs() <= 1e-9 * (1.0 + ca));
            prop_assert!(a.sd >= 0.0);
        }
    }
}
