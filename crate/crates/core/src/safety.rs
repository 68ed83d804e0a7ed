//! Leakage and patient auxiliary current assessment.
//!
//! Currents are derived from the voltage drop across a series resistor
//! between the signal line and ground (Ohm's law), then compared against the
//! configured limits. Verdicts use the per-sensor mean unless the worst-case
//! basis is selected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RepetitionTable;
use crate::model::{
    descriptive_stats, mean, sample_sd, verdict, ComplianceThresholds, DescriptiveStats, Verdict,
    VerdictLevel,
};

/// µA from a voltage drop in mV across `resistance_ohm`.
pub fn current_from_voltage(voltage_mv: f64, resistance_ohm: f64) -> Result<f64> {
    if !(resistance_ohm.is_finite() && resistance_ohm > 0.0) {
        return Err(Error::invalid(format!(
            "resistance must be > 0, got {resistance_ohm}"
        )));
    }
    if !voltage_mv.is_finite() {
        return Err(Error::NonFinite("voltage".into()));
    }
    Ok(voltage_mv / (resistance_ohm / 1000.0))
}

/// Unit of the values in a repetition table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementInput {
    #[default]
    MicroAmp,
    /// Voltage drop across the configured body resistance.
    MilliVolt,
}

/// Which statistic of a sensor's repetitions is compared against the limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictBasis {
    #[default]
    Mean,
    WorstCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLeakage {
    pub sensor: String,
    pub currents_ua: Vec<f64>,
    pub stats: DescriptiveStats,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageAssessment {
    pub per_sensor: Vec<SensorLeakage>,
    pub limit_ua: f64,
    pub basis: VerdictBasis,
}

impl LeakageAssessment {
    pub fn worst_level(&self) -> VerdictLevel {
        VerdictLevel::worst(self.per_sensor.iter().map(|s| s.verdict.level))
    }
}

fn to_currents(values: &[f64], input: MeasurementInput, resistance_ohm: f64) -> Result<Vec<f64>> {
    match input {
        MeasurementInput::MicroAmp => Ok(values.to_vec()),
        MeasurementInput::MilliVolt => values
            .iter()
            .map(|&v| current_from_voltage(v, resistance_ohm))
            .collect(),
    }
}

pub fn assess_leakage(
    table: &RepetitionTable,
    thresholds: &ComplianceThresholds,
    input: MeasurementInput,
    basis: VerdictBasis,
) -> Result<LeakageAssessment> {
    thresholds.validate()?;
    let mut per_sensor = Vec::with_capacity(table.rows.len());
    for (label, row) in table.labels.iter().zip(&table.rows) {
        if row.is_empty() {
            return Err(Error::empty(format!("sensor {label} has no repetitions")));
        }
        let currents = to_currents(row, input, thresholds.body_resistance_ohm)?;
        if currents.iter().any(|&c| c < 0.0) {
            return Err(Error::invalid(format!("sensor {label}: negative current")));
        }
        let stats = descriptive_stats(&currents)?;
        let judged = match basis {
            VerdictBasis::Mean => stats.mean,
            VerdictBasis::WorstCase => currents.iter().copied().fold(f64::MIN, f64::max),
        };
        let verdict = verdict(
            judged,
            thresholds.leakage_limit_ua,
            thresholds.marginal_multiplier,
        )?;
        per_sensor.push(SensorLeakage {
            sensor: label.clone(),
            currents_ua: currents,
            stats,
            verdict,
        });
    }
    Ok(LeakageAssessment {
        per_sensor,
        limit_ua: thresholds.leakage_limit_ua,
        basis,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryAssessment {
    pub repetitions: Vec<f64>,
    pub mean_ua: f64,
    /// Sample (N − 1) standard deviation.
    pub sd_ua: f64,
    pub limit_ua: f64,
    pub verdict: Verdict,
    pub count_over_limit: usize,
}

pub fn assess_auxiliary(
    values: &[f64],
    thresholds: &ComplianceThresholds,
) -> Result<AuxiliaryAssessment> {
    thresholds.validate()?;
    if values.is_empty() {
        return Err(Error::empty(
            "auxiliary current needs at least one repetition",
        ));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("auxiliary currents must be finite and >= 0"));
    }
    let limit = thresholds.auxiliary_limit_ua;
    let mean_ua = mean(values);
    Ok(AuxiliaryAssessment {
        repetitions: values.to_vec(),
        mean_ua,
        sd_ua: sample_sd(values),
        limit_ua: limit,
        verdict: verdict(mean_ua, limit, thresholds.marginal_multiplier)?,
        count_over_limit: values.iter().filter(|&&v| v > limit).count(),
    })
}

/// Safety results as written to a section file and consumed by the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetySection {
    pub leakage: Option<LeakageAssessment>,
    pub auxiliary: Option<AuxiliaryAssessment>,
    pub verdict: VerdictLevel,
}

impl SafetySection {
    pub fn new(
        leakage: Option<LeakageAssessment>,
        auxiliary: Option<AuxiliaryAssessment>,
    ) -> Result<Self> {
        if leakage.is_none() && auxiliary.is_none() {
            return Err(Error::empty(
                "safety section needs leakage or auxiliary data",
            ));
        }
        let verdict = VerdictLevel::worst(
            leakage
                .iter()
                .map(LeakageAssessment::worst_level)
                .chain(auxiliary.iter().map(|a| a.verdict.level)),
        );
        Ok(Self {
            leakage,
            auxiliary,
            verdict,
        })
    }
}
