use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What to do with samples left over after the last full window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrailingPolicy {
    #[default]
    Drop,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub length_samples: usize,
    pub overlap_fraction: f64,
    pub trailing: TrailingPolicy,
}

impl WindowPlan {
    pub fn new(
        length_samples: usize,
        overlap_fraction: f64,
        trailing: TrailingPolicy,
    ) -> Result<Self> {
        if length_samples == 0 {
            return Err(Error::invalid("window length must be > 0"));
        }
        if !(0.0..1.0).contains(&overlap_fraction) {
            return Err(Error::invalid(format!(
                "overlap must lie in [0, 1), got {overlap_fraction}"
            )));
        }
        let plan = Self {
            length_samples,
            overlap_fraction,
            trailing,
        };
        if plan.raw_step() < 1.0 {
            return Err(Error::invalid("window step must be at least one sample"));
        }
        Ok(plan)
    }

    /// Window of `window_ms` at `rate_hz`, rounded to whole samples.
    pub fn from_duration(
        window_ms: f64,
        overlap_fraction: f64,
        rate_hz: f64,
        trailing: TrailingPolicy,
    ) -> Result<Self> {
        if !(window_ms.is_finite() && window_ms > 0.0 && rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::invalid("window duration and rate must be > 0"));
        }
        let len = (window_ms * rate_hz / 1000.0).round() as usize;
        Self::new(len, overlap_fraction, trailing)
    }

    fn raw_step(&self) -> f64 {
        (self.length_samples as f64 * (1.0 - self.overlap_fraction)).floor()
    }

    pub fn step(&self) -> usize {
        self.raw_step() as usize
    }

    /// Sample ranges of every window over a signal of `len` samples.
    pub fn windows(&self, len: usize) -> Vec<Range<usize>> {
        let step = self.step();
        let mut out = Vec::new();
        let mut start = 0;
        while start + self.length_samples <= len {
            out.push(start..start + self.length_samples);
            start += step;
        }
        if self.trailing == TrailingPolicy::Keep && start < len {
            out.push(start..len);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Feature {
    Rms,
    Mav,
    Iemg,
    Var,
    Wl,
}

impl Feature {
    pub const ALL: [Feature; 5] = [
        Feature::Rms,
        Feature::Mav,
        Feature::Iemg,
        Feature::Var,
        Feature::Wl,
    ];

    pub fn long_name(self) -> &'static str {
        match self {
            Feature::Rms => "Root Mean Square",
            Feature::Mav => "Mean Absolute Value",
            Feature::Iemg => "Integrated Electromyography",
            Feature::Var => "Variance",
            Feature::Wl => "Waveform Length",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feature::Rms => "RMS",
            Feature::Mav => "MAV",
            Feature::Iemg => "IEMG",
            Feature::Var => "VAR",
            Feature::Wl => "WL",
        })
    }
}

/// Variance convention for the VAR feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarConvention {
    /// Σ(x − x̄)² / (N − 1)
    #[default]
    MeanCentered,
    /// Σx² / (N − 1)
    ZeroMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSeries {
    pub feature: Feature,
    pub values: Vec<f64>,
    pub plan: WindowPlan,
}

/// All five features of one window, in [`Feature::ALL`] order.
pub fn window_features(window: &[f64], var: VarConvention) -> [f64; 5] {
    let n = window.len();
    if n == 0 {
        return [0.0; 5];
    }
    let nf = n as f64;
    let mut sum_abs = 0.0;
    let mut sum_sq = 0.0;
    let mut sum = 0.0;
    for &x in window {
        sum_abs += x.abs();
        sum_sq += x * x;
        sum += x;
    }
    let wl: f64 = window.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let variance = if n < 2 {
        0.0
    } else {
        match var {
            VarConvention::MeanCentered => {
                let m = sum / nf;
                window.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (nf - 1.0)
            }
            VarConvention::ZeroMean => sum_sq / (nf - 1.0),
        }
    };
    [(sum_sq / nf).sqrt(), sum_abs / nf, sum_abs, variance, wl]
}

pub fn extract_features(
    samples: &[f64],
    plan: &WindowPlan,
    var: VarConvention,
) -> Result<BTreeMap<Feature, FeatureSeries>> {
    if plan.length_samples > samples.len() {
        return Err(Error::invalid(format!(
            "window of {} samples longer than signal of {}",
            plan.length_samples,
            samples.len()
        )));
    }
    let windows = plan.windows(samples.len());
    let mut columns: [Vec<f64>; 5] = Default::default();
    for w in windows {
        let values = window_features(&samples[w], var);
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(v);
        }
    }
    Ok(Feature::ALL
        .into_iter()
        .zip(columns)
        .map(|(feature, values)| {
            (
                feature,
                FeatureSeries {
                    feature,
                    values,
                    plan: *plan,
                },
            )
        })
        .collect())
}

/// Divides by the peak absolute value so the output peaks at magnitude 1.
pub fn normalize(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::empty("cannot normalise an empty signal"));
    }
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak == 0.0 {
        return Err(Error::invalid("cannot normalise an all-zero signal"));
    }
    if !peak.is_finite() {
        return Err(Error::NonFinite("signal".into()));
    }
    Ok(samples.iter().map(|x| x / peak).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn alternating_window() {
        let [rms, mav, iemg, var, wl] =
            window_features(&[1.0, -1.0, 1.0, -1.0], VarConvention::MeanCentered);
        assert_eq!(rms, 1.0);
        assert_eq!(mav, 1.0);
        assert_eq!(iemg, 4.0);
        assert_eq!(wl, 6.0);
        assert!((var - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_and_constant_windows() {
        assert_eq!(
            window_features(&[0.0; 16], VarConvention::MeanCentered),
            [0.0; 5]
        );
        let [rms, _, _, var, wl] = window_features(&[-2.5; 3], VarConvention::MeanCentered);
        assert_eq!(var, 0.0);
        assert_eq!(wl, 0.0);
        assert_eq!(rms, 2.5);
    }

    #[test]
    fn zero_mean_variance_convention() {
        let [_, _, _, var, _] = window_features(&[1.0, 2.0, 3.0], VarConvention::ZeroMean);
        assert!((var - 14.0 / 2.0).abs() < 1e-15);
        let [_, _, _, var, _] = window_features(&[1.0, 2.0, 3.0], VarConvention::MeanCentered);
        assert!((var - 1.0).abs() < 1e-15);
    }

    #[test]
    fn plan_windows() {
        let plan = WindowPlan::new(4, 0.5, TrailingPolicy::Drop).unwrap();
        assert_eq!(plan.step(), 2);
        assert_eq!(plan.windows(9), vec![0..4, 2..6, 4..8]);
        let keep = WindowPlan::new(4, 0.5, TrailingPolicy::Keep).unwrap();
        assert_eq!(keep.windows(9), vec![0..4, 2..6, 4..8, 6..9]);
        assert!(WindowPlan::new(0, 0.0, TrailingPolicy::Drop).is_err());
        assert!(WindowPlan::new(4, 1.0, TrailingPolicy::Drop).is_err());
        assert!(WindowPlan::new(1, 0.5, TrailingPolicy::Drop).is_err());
        let ms = WindowPlan::from_duration(200.0, 0.5, 1000.0, TrailingPolicy::Drop).unwrap();
        assert_eq!(ms.length_samples, 200);
        assert_eq!(ms.step(), 100);
    }

    #[test]
    fn window_longer_than_signal() {
        let plan = WindowPlan::new(10, 0.0, TrailingPolicy::Drop).unwrap();
        assert!(extract_features(&[1.0; 5], &plan, VarConvention::MeanCentered).is_err());
    }

    #[test]
    fn normalize_cases() {
        assert_eq!(normalize(&[2.0, -4.0, 1.0]).unwrap(), vec![0.5, -1.0, 0.25]);
        let once = normalize(&[0.3, -1.0, 0.7]).unwrap();
        assert_eq!(normalize(&once).unwrap(), once);
        assert!(normalize(&[0.0, 0.0]).is_err());
        assert!(normalize(&[]).is_err());
    }

    proptest! {
        #[test]
        fn iemg_is_n_times_mav(xs in prop::collection::vec(-10.0f64..10.0, 8..200), len in 2usize..8) {
            let plan = WindowPlan::new(len, 0.5, TrailingPolicy::Drop).unwrap();
            let f = extract_features(&xs, &plan, VarConvention::MeanCentered).unwrap();
            for (iemg, mav) in f[&Feature::Iemg].values.iter().zip(&f[&Feature::Mav].values) {
                prop_assert!((iemg - len as f64 * mav).abs() <= 1e-12 * (1.0 + iemg.abs()));
            }
        }

        #[test]
        fn features_non_negative_and_wl_zero_iff_constant(xs in prop::collection::vec(-10.0f64..10.0, 1..64)) {
            let v = window_features(&xs, VarConvention::MeanCentered);
            prop_assert!(v.iter().all(|x| *x >= 0.0));
            let constant = xs.iter().all(|x| *x == xs[0]);
            prop_assert_eq!(v[4] == 0.0, constant);
        }
    }
}
