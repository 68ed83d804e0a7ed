use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::features::{
    extract_features, normalize, Feature, TrailingPolicy, VarConvention, WindowPlan,
};
use super::metrics::{bland_altman, mape, pearson, BlandAltman, MAPE_EPSILON};
use crate::error::{Error, Result};
use crate::model::{mean, Recording};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub window_ms: f64,
    pub overlap_fraction: f64,
    pub trailing: TrailingPolicy,
    pub var_convention: VarConvention,
    pub epsilon: f64,
    /// Alignment search range, ± seconds.
    pub max_lag_s: f64,
    /// Pearson correlation over the aligned overlap below which the signals are rejected.
    pub min_alignment_r: f64,
    pub prototype_channel: Option<u8>,
    pub reference_channel: Option<u8>,
    /// Remove each signal's mean before alignment and normalisation.
    pub detrend: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            window_ms: 200.0,
            overlap_fraction: 0.5,
            trailing: TrailingPolicy::Drop,
            var_convention: VarConvention::MeanCentered,
            epsilon: MAPE_EPSILON,
            max_lag_s: 2.0,
            min_alignment_r: 0.2,
            prototype_channel: None,
            reference_channel: None,
            detrend: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAgreement {
    pub feature: Feature,
    pub mape_percent: f64,
    pub one_minus_mape_percent: f64,
    pub pearson_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub common_rate_hz: f64,
    /// Positive when the prototype lags the reference.
    pub lag_samples: i64,
    pub lag_ms: f64,
    pub alignment_r: f64,
    pub overlap_samples: usize,
    pub window_plan: WindowPlan,
    pub windows: usize,
    pub features: Vec<FeatureAgreement>,
    /// Prototype − reference on the RMS series.
    pub bland_altman: BlandAltman,
}

impl AgreementReport {
    pub fn feature(&self, f: Feature) -> Option<&FeatureAgreement> {
        self.features.iter().find(|a| a.feature == f)
    }
}

/// Linear-interpolation resampling from `from_hz` to `to_hz`.
pub fn resample_linear(samples: &[f64], from_hz: f64, to_hz: f64) -> Vec<f64> {
    if samples.is_empty() || from_hz == to_hz {
        return samples.to_vec();
    }
    let last = (samples.len() - 1) as f64;
    let n_out = (last * to_hz / from_hz).floor() as usize + 1;
    (0..n_out)
        .map(|k| {
            let t = k as f64 * from_hz / to_hz;
            let i = t.floor() as usize;
            if i + 1 >= samples.len() {
                samples[samples.len() - 1]
            } else {
                let frac = t - i as f64;
                samples[i] + frac * (samples[i + 1] - samples[i])
            }
        })
        .collect()
}

/// Lag `k` in `[-max_lag, max_lag]` maximising Σ a[i + k]·b[i] over mean-removed
/// signals, computed by FFT.
pub fn align(a: &[f64], b: &[f64], max_lag: usize) -> Result<i64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::empty("cannot align an empty signal"));
    }
    let n = (a.len() + b.len() - 1).next_power_of_two();
    let centered = |x: &[f64]| {
        let m = mean(x);
        let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
        buf.resize(n, Complex::new(0.0, 0.0));
        buf
    };
    let mut fa = centered(a);
    let mut fb = centered(b);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut prod: Vec<Complex<f64>> = fa.iter().zip(&fb).map(|(x, y)| x * y.conj()).collect();
    planner.plan_fft_inverse(n).process(&mut prod);

    let max_pos = max_lag.min(a.len() - 1) as i64;
    let max_neg = max_lag.min(b.len() - 1) as i64;
    let mut best = (0i64, f64::NEG_INFINITY);
    for k in -max_neg..=max_pos {
        let idx = if k >= 0 {
            k as usize
        } else {
            n - (-k) as usize
        };
        let v = prod[idx].re;
        if v > best.1 {
            best = (k, v);
        }
    }
    Ok(best.0)
}

fn overlap<'a>(a: &'a [f64], b: &'a [f64], lag: i64) -> (&'a [f64], &'a [f64]) {
    let (a, b) = if lag >= 0 {
        (&a[lag as usize..], b)
    } else {
        (a, &b[(-lag) as usize..])
    };
    let len = a.len().min(b.len());
    (&a[..len], &b[..len])
}

fn pick_channel(rec: &Recording, id: Option<u8>, role: &str) -> Result<Vec<f64>> {
    match id {
        None => Ok(rec.channels()[0].samples.clone()),
        Some(id) => rec
            .channel(id)
            .map(|c| c.samples.clone())
            .ok_or_else(|| Error::invalid(format!("{role} recording has no channel {id}"))),
    }
}

fn detrended(mut x: Vec<f64>) -> Vec<f64> {
    let m = mean(&x);
    x.iter_mut().for_each(|v| *v -= m);
    x
}

/// Resamples to the lower rate, aligns by cross-correlation, peak-normalises,
/// extracts windowed features and scores agreement per feature. The reference
/// device is the MAPE denominator.
pub fn compare_devices(
    prototype: &Recording,
    reference: &Recording,
    opts: &CompareOptions,
) -> Result<AgreementReport> {
    let mut proto = pick_channel(prototype, opts.prototype_channel, "prototype")?;
    let mut refer = pick_channel(reference, opts.reference_channel, "reference")?;
    let rate = prototype.rate_hz().min(reference.rate_hz());
    proto = resample_linear(&proto, prototype.rate_hz(), rate);
    refer = resample_linear(&refer, reference.rate_hz(), rate);
    if opts.detrend {
        proto = detrended(proto);
        refer = detrended(refer);
    }

    let max_lag = (opts.max_lag_s * rate).round() as usize;
    let lag = align(&proto, &refer, max_lag)?;
    let (p, r) = overlap(&proto, &refer, lag);
    if p.len() < 2 {
        return Err(Error::Unrelatable(0.0));
    }
    let alignment_r = pearson(p, r).unwrap_or(0.0);
    if alignment_r.is_nan() || alignment_r < opts.min_alignment_r {
        return Err(Error::Unrelatable(alignment_r));
    }

    let p = normalize(p)?;
    let r = normalize(r)?;
    let plan =
        WindowPlan::from_duration(opts.window_ms, opts.overlap_fraction, rate, opts.trailing)?;
    let pf = extract_features(&p, &plan, opts.var_convention)?;
    let rf = extract_features(&r, &plan, opts.var_convention)?;

    let mut features = Vec::with_capacity(Feature::ALL.len());
    for f in Feature::ALL {
        let (test, refv) = (&pf[&f].values, &rf[&f].values);
        let m = mape(refv, test, opts.epsilon)?;
        features.push(FeatureAgreement {
            feature: f,
            mape_percent: m,
            one_minus_mape_percent: 100.0 - m,
            pearson_r: pearson(refv, test)?,
        });
    }
    let bland_altman = bland_altman(&pf[&Feature::Rms].values, &rf[&Feature::Rms].values)?;

    Ok(AgreementReport {
        common_rate_hz: rate,
        lag_samples: lag,
        lag_ms: lag as f64 * 1000.0 / rate,
        alignment_r,
        overlap_samples: p.len(),
        window_plan: plan,
        windows: pf[&Feature::Rms].values.len(),
        features,
        bland_altman,
    })
}
