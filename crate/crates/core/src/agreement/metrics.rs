use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_finite, mean, sample_sd};

/// Floor on |reference| in the MAPE denominator (normalised units).
pub const MAPE_EPSILON: f64 = 1e-12;

fn same_length(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Mean absolute percentage error of `test` against `reference`.
///
/// Unbounded above, so `100 − mape` may be negative.
pub fn mape(reference: &[f64], test: &[f64], epsilon: f64) -> Result<f64> {
    same_length(reference, test)?;
    if reference.is_empty() {
        return Err(Error::empty("MAPE needs at least one pair"));
    }
    check_finite(reference, "MAPE reference")?;
    check_finite(test, "MAPE test")?;
    let total: f64 = reference
        .iter()
        .zip(test)
        .map(|(r, t)| (r - t).abs() / r.abs().max(epsilon))
        .sum();
    Ok(100.0 * total / reference.len() as f64)
}

/// Pearson product-moment correlation, clamped to [−1, 1].
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    same_length(a, b)?;
    if a.len() < 2 {
        return Err(Error::invalid(
            "Pearson correlation needs at least two pairs",
        ));
    }
    check_finite(a, "Pearson input")?;
    check_finite(b, "Pearson input")?;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantSeries("Pearson correlation"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlandAltmanPoint {
    pub mean: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman {
    pub bias: f64,
    /// Sample SD of the differences.
    pub sd_diff: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    pub fraction_within_loa: f64,
    pub points: Vec<BlandAltmanPoint>,
}

impl BlandAltman {
    /// `mean,diff` rows.
    pub fn points_csv(&self) -> String {
        let mut out = String::from("mean,diff\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.mean, p.diff));
        }
        out
    }

    /// Horizontal reference lines of the plot.
    pub fn lines_csv(&self) -> String {
        format!(
            "bias,loa_low,loa_high\n{},{},{}\n",
            self.bias, self.loa_low, self.loa_high
        )
    }
}

/// Differences are `a − b`; limits are bias ± 1.96 · sd(diff).
pub fn bland_altman(a: &[f64], b: &[f64]) -> Result<BlandAltman> {
    same_length(a, b)?;
    if a.len() < 2 {
        return Err(Error::invalid("Bland-Altman needs at least two pairs"));
    }
    check_finite(a, "Bland-Altman input")?;
    check_finite(b, "Bland-Altman input")?;
    let points: Vec<BlandAltmanPoint> = a
        .iter()
        .zip(b)
        .map(|(x, y)| BlandAltmanPoint {
            mean: (x + y) / 2.0,
            diff: x - y,
        })
        .collect();
    let diffs: Vec<f64> = points.iter().map(|p| p.diff).collect();
    let bias = mean(&diffs);
    let sd_diff = sample_sd(&diffs);
    let loa_low = bias - 1.96 * sd_diff;
    let loa_high = bias + 1.96 * sd_diff;
    let within = diffs
        .iter()
        .filter(|&&d| d >= loa_low && d <= loa_high)
        .count();
    Ok(BlandAltman {
        bias,
        sd_diff,
        loa_low,
        loa_high,
        fraction_within_loa: within as f64 / diffs.len() as f64,
        points,
    })
}
