//! Engineering stress–strain curve of an enclosure compression test and its
//! elastic assessment.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ForceDisplacementLog;
use crate::model::{ComplianceThresholds, VerdictLevel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressStrainPoint {
    pub stress_mpa: f64,
    pub strain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressStrainCurve {
    pub points: Vec<StressStrainPoint>,
    pub max_stress_mpa: f64,
    pub max_force_n: f64,
    /// Last point of the loading segment.
    pub peak_index: usize,
}

impl StressStrainCurve {
    pub fn loading(&self) -> &[StressStrainPoint] {
        &self.points[..=self.peak_index]
    }

    pub fn unloading(&self) -> &[StressStrainPoint] {
        &self.points[self.peak_index + 1..]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("strain,stress_mpa\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{}", p.strain, p.stress_mpa);
        }
        out
    }
}

/// σ = F / A (N/mm² = MPa), ε = d / h₀.
pub fn build_curve(log: &ForceDisplacementLog) -> Result<StressStrainCurve> {
    if !(log.area_mm2.is_finite() && log.area_mm2 > 0.0) {
        return Err(Error::invalid("area_mm2 must be > 0"));
    }
    if !(log.height_mm.is_finite() && log.height_mm > 0.0) {
        return Err(Error::invalid("height_mm must be > 0"));
    }
    if log.points.is_empty() {
        return Err(Error::empty("force-displacement log has no points"));
    }
    let points: Vec<StressStrainPoint> = log
        .points
        .iter()
        .map(|p| StressStrainPoint {
            stress_mpa: p.force_n / log.area_mm2,
            strain: p.displacement_mm / log.height_mm,
        })
        .collect();
    let max_force_n = log.points.iter().map(|p| p.force_n).fold(0.0, f64::max);
    Ok(StressStrainCurve {
        max_stress_mpa: max_force_n / log.area_mm2,
        max_force_n,
        peak_index: log.peak_index(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Test rigs usually have a seating offset.
    #[default]
    FreeIntercept,
    AnchorOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticAssessment {
    pub fit_mode: FitMode,
    pub loading_points: usize,
    pub linear_r2: f64,
    pub modulus_estimate_mpa: f64,
    pub intercept_mpa: f64,
    pub max_stress_mpa: f64,
    pub max_force_n: f64,
    pub yield_low_mpa: f64,
    /// Against the lower yield bound.
    pub safety_factor: f64,
    pub r2_min: f64,
    pub verdict_elastic: bool,
    /// Strain left at the end of the unloading segment, if one was recorded.
    pub residual_strain: Option<f64>,
    pub plastic_flag: bool,
    pub verdict: VerdictLevel,
}

struct Fit {
    slope: f64,
    intercept: f64,
    r2: f64,
}

fn linear_fit(x: &[f64], y: &[f64], mode: FitMode) -> Fit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (slope, intercept) = match mode {
        FitMode::FreeIntercept => {
            let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
            let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
            let slope = sxy / sxx;
            (slope, my - slope * mx)
        }
        FitMode::AnchorOrigin => {
            let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let sxx: f64 = x.iter().map(|a| a * a).sum();
            (sxy / sxx, 0.0)
        }
    };
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (slope * a + intercept)).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Fit {
        slope,
        intercept,
        r2,
    }
}

/// Least-squares fit of stress on strain over the loading segment.
pub fn assess_elasticity(
    curve: &StressStrainCurve,
    thresholds: &ComplianceThresholds,
    mode: FitMode,
) -> Result<ElasticAssessment> {
    thresholds.validate()?;
    let loading = curve.loading();
    if loading.len() < 3 {
        return Err(Error::invalid(format!(
            "elastic fit needs at least 3 loading points, got {}",
            loading.len()
        )));
    }
    if curve.max_stress_mpa.is_nan() || curve.max_stress_mpa <= 0.0 {
        return Err(Error::invalid("no load applied (max stress is 0)"));
    }
    let x: Vec<f64> = loading.iter().map(|p| p.strain).collect();
    let y: Vec<f64> = loading.iter().map(|p| p.stress_mpa).collect();
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::invalid("degenerate curve: all strains equal"));
    }
    let fit = linear_fit(&x, &y, mode);

    let residual_strain = curve.unloading().last().map(|p| p.strain);
    let plastic_flag = residual_strain.is_some_and(|r| r > thresholds.residual_strain_limit);
    let yield_low = thresholds.petg_yield_mpa.low;
    let safety_factor = yield_low / curve.max_stress_mpa;
    let verdict_elastic = fit.r2 >= thresholds.elastic_r2_min;
    let verdict = if !verdict_elastic || safety_factor < 1.0 {
        VerdictLevel::Fail
    } else if plastic_flag {
        VerdictLevel::Marginal
    } else {
        VerdictLevel::Pass
    };
    Ok(ElasticAssessment {
        fit_mode: mode,
        loading_points: loading.len(),
        linear_r2: fit.r2,
        modulus_estimate_mpa: fit.slope,
        intercept_mpa: fit.intercept,
        max_stress_mpa: curve.max_stress_mpa,
        max_force_n: curve.max_force_n,
        yield_low_mpa: yield_low,
        safety_factor,
        r2_min: thresholds.elastic_r2_min,
        verdict_elastic,
        residual_strain,
        plastic_flag,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechSection {
    pub assessment: ElasticAssessment,
    pub artifacts: Vec<String>,
}
