//! Baseline stability under no load, and stage × frequency gain error against
//! simulated values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{parse_number, FrequencySweep};
use crate::model::{descriptive_stats, mean, DescriptiveStats, VerdictLevel};

/// Minimum number of repetitions before stability results are considered conclusive.
pub const MIN_REPETITIONS: usize = 3;

/// Column averages over repetitions, laid out like a summary table's "Mean" row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub mean: f64,
    pub sd: f64,
    pub cv_percent: Option<f64>,
    pub mean_variation_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub per_repetition: Vec<DescriptiveStats>,
    /// Statistics over the repetition means.
    pub overall: DescriptiveStats,
    pub average_row: AverageRow,
    pub warnings: Vec<String>,
    pub verdict: VerdictLevel,
}

fn mean_of_options(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.map(|v| mean(&v))
}

/// One repetition per input series (a single channel of a no-load recording).
pub fn assess_stability<S: AsRef<[f64]>>(repetitions: &[S]) -> Result<StabilityReport> {
    if repetitions.is_empty() {
        return Err(Error::empty("stability needs at least one repetition"));
    }
    let per_repetition = repetitions
        .iter()
        .map(|r| descriptive_stats(r.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = per_repetition.iter().map(|s| s.mean).collect();
    let overall = descriptive_stats(&means)?;
    let sds: Vec<f64> = per_repetition.iter().map(|s| s.sd).collect();
    let average_row = AverageRow {
        mean: overall.mean,
        sd: mean(&sds),
        cv_percent: mean_of_options(per_repetition.iter().map(|s| s.cv_percent)),
        mean_variation_percent: mean_of_options(
            per_repetition.iter().map(|s| s.mean_variation_percent),
        ),
    };
    let mut warnings = Vec::new();
    if repetitions.len() < MIN_REPETITIONS {
        warnings.push(format!(
            "only {} repetition(s); at least {MIN_REPETITIONS} expected",
            repetitions.len()
        ));
    }
    let verdict = if warnings.is_empty() {
        VerdictLevel::Pass
    } else {
        VerdictLevel::Marginal
    };
    Ok(StabilityReport {
        per_repetition,
        overall,
        average_row,
        warnings,
        verdict,
    })
}

/// `100 · (measured − simulated) / simulated`; negative when the measurement falls short.
pub fn percentage_error(simulated_gain: f64, measured_gain: f64) -> Result<f64> {
    if simulated_gain == 0.0 {
        return Err(Error::invalid("simulated gain is zero"));
    }
    if !simulated_gain.is_finite() || !measured_gain.is_finite() {
        return Err(Error::NonFinite("gain".into()));
    }
    Ok(100.0 * (measured_gain - simulated_gain) / simulated_gain)
}

/// Processing stage names of the sEMG front-end, indexed by stage id.
pub fn stage_label(stage: u8) -> &'static str {
    match stage {
        1 => "preamplifier",
        2 => "instrumentation amplifier",
        3 => "notch filter",
        4 => "high-pass filter",
        5..=7 => "band-pass filter",
        8 => "rectifier",
        _ => "unknown",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub stage: u8,
    pub frequency_hz: f64,
    pub pe_percent: f64,
}

/// Percentage error per (stage, frequency); absent cells are `None`, never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMatrix {
    pub stages: Vec<u8>,
    pub frequencies_hz: Vec<f64>,
    pub errors_percent: Vec<Vec<Option<f64>>>,
}

pub fn build_error_matrix(sweep: &FrequencySweep) -> Result<ErrorMatrix> {
    let mut stages: Vec<u8> = sweep.entries.iter().map(|e| e.stage).collect();
    stages.sort_unstable();
    stages.dedup();
    let mut frequencies_hz: Vec<f64> = sweep.entries.iter().map(|e| e.frequency_hz).collect();
    frequencies_hz.sort_by(f64::total_cmp);
    frequencies_hz.dedup();

    let mut errors_percent = vec![vec![None; frequencies_hz.len()]; stages.len()];
    for e in &sweep.entries {
        let r = stages
            .binary_search(&e.stage)
            .expect("stage collected above");
        let c = frequencies_hz
            .binary_search_by(|f| f.total_cmp(&e.frequency_hz))
            .expect("frequency collected above");
        errors_percent[r][c] = Some(percentage_error(e.simulated_gain, e.measured_gain)?);
    }
    Ok(ErrorMatrix {
        stages,
        frequencies_hz,
        errors_percent,
    })
}

impl ErrorMatrix {
    pub fn get(&self, stage: u8, frequency_hz: f64) -> Option<f64> {
        let r = self.stages.iter().position(|&s| s == stage)?;
        let c = self
            .frequencies_hz
            .iter()
            .position(|&f| f == frequency_hz)?;
        self.errors_percent[r][c]
    }

    /// Largest |PE| and where it occurs.
    pub fn max_abs(&self) -> Option<MatrixCell> {
        let mut best: Option<MatrixCell> = None;
        for (r, row) in self.errors_percent.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if let Some(pe) = *cell {
                    if best.is_none_or(|b| pe.abs() > b.pe_percent.abs()) {
                        best = Some(MatrixCell {
                            stage: self.stages[r],
                            frequency_hz: self.frequencies_hz[c],
                            pe_percent: pe,
                        });
                    }
                }
            }
        }
        best
    }

    /// Wide CSV: one row per stage, one column per frequency, blank = missing.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage");
        for f in &self.frequencies_hz {
            let _ = write!(out, ",{f}");
        }
        out.push('\n');
        for (stage, row) in self.stages.iter().zip(&self.errors_percent) {
            let _ = write!(out, "{stage}");
            for cell in row {
                out.push(',');
                if let Some(v) = cell {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Inverse of [`ErrorMatrix::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::empty("matrix CSV is empty"))?;
        let frequencies_hz = header
            .split(',')
            .skip(1)
            .map(|c| parse_number(c).ok_or_else(|| Error::invalid(format!("bad frequency {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut stages = Vec::new();
        let mut errors_percent = Vec::new();
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != frequencies_hz.len() + 1 {
                return Err(Error::RaggedRow {
                    row: i + 2,
                    expected: frequencies_hz.len() + 1,
                    found: cells.len(),
                });
            }
            stages.push(
                cells[0]
                    .trim()
                    .parse::<u8>()
                    .map_err(|_| Error::invalid(format!("bad stage {:?}", cells[0])))?,
            );
            let row = cells[1..]
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    if c.trim().is_empty() {
                        Ok(None)
                    } else {
                        parse_number(c).map(Some).ok_or_else(|| Error::NonNumeric {
                            row: i + 2,
                            column: j + 2,
                            cell: c.to_string(),
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            errors_percent.push(row);
        }
        Ok(Self {
            stages,
            frequencies_hz,
            errors_percent,
        })
    }

    /// Long-form heatmap data `stage,frequency_hz,pe_percent`; missing cells omitted.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from("stage,frequency_hz,pe_percent\n");
        for (stage, row) in self.stages.iter().zip(&self.errors_percent) {
            for (f, cell) in self.frequencies_hz.iter().zip(row) {
                if let Some(v) = cell {
                    let _ = writeln!(out, "{stage},{f},{v}");
                }
            }
        }
        out
    }

    /// Minimal SVG grid heatmap: blue for negative error, red for positive,
    /// intensity by |PE| relative to the largest |PE|; missing cells hatched grey.
    pub fn to_svg(&self) -> String {
        const CELL: usize = 48;
        const LEFT: usize = 40;
        const TOP: usize = 24;
        let width = LEFT + CELL * self.frequencies_hz.len();
        let height = TOP + CELL * self.stages.len();
        let scale = self
            .max_abs()
            .map_or(1.0, |c| c.pe_percent.abs().max(f64::MIN_POSITIVE));
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"10\">\n"
        );
        for (c, f) in self.frequencies_hz.iter().enumerate() {
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"16\" text-anchor=\"middle\">{f} Hz</text>",
                LEFT + c * CELL + CELL / 2
            );
        }
        for (r, (stage, row)) in self.stages.iter().zip(&self.errors_percent).enumerate() {
            let y = TOP + r * CELL;
            let _ = writeln!(
                svg,
                "<text x=\"4\" y=\"{}\">S{stage}</text>",
                y + CELL / 2 + 4
            );
            for (c, cell) in row.iter().enumerate() {
                let x = LEFT + c * CELL;
                let fill = match cell {
                    None => "#cccccc".to_string(),
                    Some(v) => {
                        let t = (v.abs() / scale).min(1.0);
                        let fade = (255.0 * (1.0 - t)).round() as u8;
                        if *v >= 0.0 {
                            format!("#ff{fade:02x}{fade:02x}")
                        } else {
                            format!("#{fade:02x}{fade:02x}ff")
                        }
                    }
                };
                let label = cell.map_or(String::new(), |v| format!("{v:.0}"));
                let _ = writeln!(
                    svg,
                    "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\" stroke=\"#ffffff\"/><text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
                    x + CELL / 2,
                    y + CELL / 2 + 4
                );
            }
        }
        svg.push_str("</svg>\n");
        svg
    }

    /// Stage labels for the stages present.
    pub fn stage_labels(&self) -> BTreeMap<u8, &'static str> {
        self.stages.iter().map(|&s| (s, stage_label(s))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResponseSection {
    pub matrix: ErrorMatrix,
    pub max_abs_error: Option<MatrixCell>,
    pub artifacts: Vec<String>,
}
