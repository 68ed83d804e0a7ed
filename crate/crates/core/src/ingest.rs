//! CSV ingestion of recordings, repetition tables, frequency sweeps and
//! force–displacement logs.
//!
//! Dialect: UTF-8, comma, semicolon or tab separated (detected from the first
//! line), LF or CRLF. Decimal commas are accepted everywhere; output always
//! uses a decimal point. The first row is a header iff any of its cells is
//! non-numeric.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelSeries, Recording, Units, MAX_CHANNEL_ID};

/// Parses a number written with either a decimal point or a decimal comma.
pub fn parse_number(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() {
        return None;
    }
    let v: f64 = if t.contains(',') {
        t.replace(',', ".").parse().ok()?
    } else {
        t.parse().ok()?
    };
    v.is_finite().then_some(v)
}

#[derive(Debug)]
struct RawRow {
    line: usize,
    cells: Vec<String>,
}

#[derive(Debug)]
struct RawTable {
    header: Option<Vec<String>>,
    rows: Vec<RawRow>,
}

fn detect_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains(';') {
        b';'
    } else if first.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn read_raw(text: &str) -> Result<RawTable> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(detect_delimiter(text))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push(RawRow {
            line,
            cells: record.iter().map(str::to_string).collect(),
        });
    }
    if rows.is_empty() {
        return Err(Error::empty("file contains no rows"));
    }
    let is_header = rows[0]
        .cells
        .iter()
        .any(|c| !c.is_empty() && parse_number(c).is_none());
    let header = is_header.then(|| rows.remove(0).cells);
    if rows.is_empty() {
        return Err(Error::empty("file contains a header but no data rows"));
    }
    Ok(RawTable { header, rows })
}

fn numeric_cell(row: &RawRow, column: usize) -> Result<f64> {
    let cell = &row.cells[column];
    parse_number(cell).ok_or_else(|| Error::NonNumeric {
        row: row.line,
        column: column + 1,
        cell: cell.clone(),
    })
}

fn check_width(row: &RawRow, expected: usize) -> Result<()> {
    if row.cells.len() != expected {
        return Err(Error::RaggedRow {
            row: row.line,
            expected,
            found: row.cells.len(),
        });
    }
    Ok(())
}

fn is_time_label(label: &str) -> bool {
    let l = label.trim().to_ascii_lowercase();
    l == "t" || l.starts_with("time") || l.starts_with("t_") || l.starts_with("t(")
}

fn channel_id_from_label(label: &str) -> Option<u8> {
    let digits: String = label.chars().filter(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

/// Relative tolerance on time-column spacing.
const TIME_SPACING_TOLERANCE: f64 = 0.01;

fn validate_time_column(times: &[f64], lines: &[usize]) -> Result<()> {
    if times.len() < 2 {
        return Ok(());
    }
    let mut steps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sorted = steps.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    if median <= 0.0 {
        return Err(Error::InvalidRow {
            row: lines[0],
            message: "time column is not increasing".into(),
        });
    }
    for (i, step) in steps.drain(..).enumerate() {
        if (step - median).abs() > TIME_SPACING_TOLERANCE * median {
            return Err(Error::InvalidRow {
                row: lines[i + 1],
                message: format!("non-uniform time column (step {step}, nominal {median})"),
            });
        }
    }
    Ok(())
}

/// Parses recording CSV text. See [`load_recording`].
pub fn parse_recording(text: &str, rate_hz: f64, units: Units) -> Result<Recording> {
    let raw = read_raw(text)?;
    let width = raw
        .header
        .as_ref()
        .map_or(raw.rows[0].cells.len(), |h| h.len());
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(raw.rows.len()); width];
    for row in &raw.rows {
        check_width(row, width)?;
        for (j, col) in columns.iter_mut().enumerate() {
            col.push(numeric_cell(row, j)?);
        }
    }

    let has_time = width >= 2
        && match &raw.header {
            Some(h) => is_time_label(&h[0]),
            None => columns[0].len() >= 3 && columns[0].windows(2).all(|w| w[1] > w[0]),
        };
    let mut labels = raw.header.clone();
    if has_time {
        let lines: Vec<usize> = raw.rows.iter().map(|r| r.line).collect();
        validate_time_column(&columns[0], &lines)?;
        columns.remove(0);
        if let Some(l) = labels.as_mut() {
            l.remove(0);
        }
    }
    if columns.len() > MAX_CHANNEL_ID as usize {
        return Err(Error::invalid(format!(
            "{} signal columns; at most {MAX_CHANNEL_ID} channels supported",
            columns.len()
        )));
    }

    let default_ids: Vec<u8> = (1..=columns.len() as u8).collect();
    let ids = labels
        .and_then(|l| {
            let ids: Option<Vec<u8>> = l.iter().map(|s| channel_id_from_label(s)).collect();
            ids.filter(|ids| {
                let mut sorted = ids.clone();
                sorted.sort_unstable();
                sorted.dedup();
                sorted.len() == ids.len() && ids.iter().all(|&i| (1..=MAX_CHANNEL_ID).contains(&i))
            })
        })
        .unwrap_or(default_ids);

    let channels = ids
        .into_iter()
        .zip(columns)
        .map(|(id, samples)| ChannelSeries::new(id, samples))
        .collect();
    Recording::new(channels, rate_hz, units)
}

/// Loads a multichannel recording: one column per channel, optional header,
/// optional leading time column (validated for uniform spacing, then dropped
/// in favour of `rate_hz`).
pub fn load_recording(path: impl AsRef<Path>, rate_hz: f64, units: Units) -> Result<Recording> {
    parse_recording(&std::fs::read_to_string(path)?, rate_hz, units)
}

/// Canonical CSV form: `ch<id>` header, comma separated, shortest round-trip floats.
pub fn write_recording(rec: &Recording) -> String {
    let mut out = String::new();
    let header: Vec<String> = rec
        .channels()
        .iter()
        .map(|c| format!("ch{}", c.id))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..rec.len() {
        for (j, ch) in rec.channels().iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", ch.samples[i]);
        }
        out.push('\n');
    }
    out
}

/// Per-sensor repeated scalar measurements (currents in µA or voltages in mV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionTable {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RepetitionTable {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::empty("repetition table has no rows"));
        }
        if labels.len() != rows.len() {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: rows.len(),
            });
        }
        for (label, row) in labels.iter().zip(&rows) {
            if row.is_empty() {
                return Err(Error::empty(format!("row {label:?} has no values")));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::invalid(format!(
                    "row {label:?}: current magnitude must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(Self { labels, rows })
    }

    /// A single unlabeled series, e.g. one measurement per repetition.
    pub fn single(values: Vec<f64>) -> Result<Self> {
        Self::new(vec!["1".into()], vec![values])
    }

    /// All values concatenated in row order.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().flatten().copied()
    }
}

fn is_summary_label(label: &str) -> bool {
    label.trim().to_ascii_lowercase().starts_with("mean")
}

/// Parses repetition-table text. See [`load_repetition_table`].
pub fn parse_repetition_table(text: &str) -> Result<RepetitionTable> {
    let raw = read_raw(text)?;
    let width = raw
        .header
        .as_ref()
        .map_or(raw.rows[0].cells.len(), |h| h.len());
    // summary columns ("Mean ± std") are recomputed, never read
    let keep: Vec<usize> = (0..width)
        .filter(|&j| {
            raw.header
                .as_ref()
                .is_none_or(|h| j == 0 || !is_summary_label(&h[j]))
        })
        .collect();
    if keep.len() < 2 {
        return Err(Error::invalid(
            "repetition table needs a label column and at least one value column",
        ));
    }

    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for row in &raw.rows {
        if row.cells.len() > width {
            return Err(Error::RaggedRow {
                row: row.line,
                expected: width,
                found: row.cells.len(),
            });
        }
        if is_summary_label(&row.cells[0]) {
            continue;
        }
        let mut values = Vec::with_capacity(keep.len() - 1);
        for &j in &keep[1..] {
            let cell = row.cells.get(j).map(String::as_str).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::InvalidRow {
                    row: row.line,
                    message: format!("missing cell in column {}", j + 1),
                });
            }
            let v = numeric_cell(row, j)?;
            if v < 0.0 {
                return Err(Error::InvalidRow {
                    row: row.line,
                    message: format!("negative current magnitude {v}"),
                });
            }
            values.push(v);
        }
        labels.push(row.cells[0].clone());
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::empty("repetition table has no data rows"));
    }
    if keep.len() == 2 && rows.len() > 1 {
        // two-column layout: one series, one repetition per line
        let label = raw
            .header
            .as_ref()
            .map(|h| h[keep[1]].clone())
            .unwrap_or_else(|| "1".into());
        return RepetitionTable::new(vec![label], vec![rows.into_iter().flatten().collect()]);
    }
    RepetitionTable::new(labels, rows)
}

/// Loads a table of `label, rep1, rep2, ...` rows. A two-column file is read
/// as a single series with one repetition per line. Columns or rows labelled
/// `Mean...` are treated as summaries and skipped.
pub fn load_repetition_table(path: impl AsRef<Path>) -> Result<RepetitionTable> {
    parse_repetition_table(&std::fs::read_to_string(path)?)
}

pub fn write_repetition_table(table: &RepetitionTable) -> String {
    let width = table.rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::from("sensor");
    for i in 1..=width {
        let _ = write!(out, ",rep{i}");
    }
    out.push('\n');
    for (label, row) in table.labels.iter().zip(&table.rows) {
        out.push_str(label);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// How gains are written in a sweep file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainScale {
    #[default]
    Linear,
    Decibel,
}

impl GainScale {
    pub fn to_linear(self, g: f64) -> f64 {
        match self {
            GainScale::Linear => g,
            GainScale::Decibel => 10f64.powf(g / 20.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub stage: u8,
    pub frequency_hz: f64,
    pub simulated_gain: f64,
    pub measured_gain: f64,
}

/// Stage × frequency gain measurements, gains stored as linear ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySweep {
    pub entries: Vec<SweepEntry>,
}

pub const MAX_STAGE: u8 = 8;

impl FrequencySweep {
    pub fn new(entries: Vec<SweepEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::empty("frequency sweep has no entries"));
        }
        for (i, e) in entries.iter().enumerate() {
            if !(1..=MAX_STAGE).contains(&e.stage) {
                return Err(Error::invalid(format!(
                    "stage {} outside 1..={MAX_STAGE}",
                    e.stage
                )));
            }
            if !(e.frequency_hz.is_finite() && e.frequency_hz > 0.0) {
                return Err(Error::invalid(format!(
                    "frequency must be > 0, got {}",
                    e.frequency_hz
                )));
            }
            if !e.simulated_gain.is_finite() || !e.measured_gain.is_finite() {
                return Err(Error::NonFinite(format!("sweep entry {i}")));
            }
            if e.simulated_gain == 0.0 {
                return Err(Error::invalid(format!(
                    "simulated gain is zero for stage {} at {} Hz",
                    e.stage, e.frequency_hz
                )));
            }
            if entries[..i]
                .iter()
                .any(|o| o.stage == e.stage && o.frequency_hz == e.frequency_hz)
            {
                return Err(Error::invalid(format!(
                    "duplicate entry for stage {} at {} Hz",
                    e.stage, e.frequency_hz
                )));
            }
        }
        Ok(Self { entries })
    }
}

/// Parses sweep text with columns `stage, frequency_hz, simulated_gain, measured_gain`.
pub fn parse_frequency_sweep(text: &str, scale: GainScale) -> Result<FrequencySweep> {
    let raw = read_raw(text)?;
    let mut entries = Vec::with_capacity(raw.rows.len());
    for row in &raw.rows {
        check_width(row, 4)?;
        let stage = numeric_cell(row, 0)?;
        if stage.fract() != 0.0 || !(1.0..=MAX_STAGE as f64).contains(&stage) {
            return Err(Error::InvalidRow {
                row: row.line,
                message: format!("stage must be an integer in 1..={MAX_STAGE}, got {stage}"),
            });
        }
        let entry = SweepEntry {
            stage: stage as u8,
            frequency_hz: numeric_cell(row, 1)?,
            simulated_gain: scale.to_linear(numeric_cell(row, 2)?),
            measured_gain: scale.to_linear(numeric_cell(row, 3)?),
        };
        if entry.simulated_gain == 0.0 {
            return Err(Error::InvalidRow {
                row: row.line,
                message: "simulated gain is zero".into(),
            });
        }
        entries.push(entry);
    }
    FrequencySweep::new(entries)
}

pub fn load_frequency_sweep(path: impl AsRef<Path>, scale: GainScale) -> Result<FrequencySweep> {
    parse_frequency_sweep(&std::fs::read_to_string(path)?, scale)
}

/// Canonical form, linear gains.
pub fn write_frequency_sweep(sweep: &FrequencySweep) -> String {
    let mut out = String::from("stage,frequency_hz,simulated_gain,measured_gain\n");
    for e in &sweep.entries {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.stage, e.frequency_hz, e.simulated_gain, e.measured_gain
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceDisplacementPoint {
    pub force_n: f64,
    pub displacement_mm: f64,
}

/// Compression test log plus the specimen geometry needed for stress and strain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceDisplacementLog {
    pub points: Vec<ForceDisplacementPoint>,
    pub area_mm2: f64,
    pub height_mm: f64,
}

impl ForceDisplacementLog {
    /// Force must be non-decreasing up to its peak (loading) and may only fall
    /// afterwards (unloading).
    pub fn new(points: Vec<ForceDisplacementPoint>, area_mm2: f64, height_mm: f64) -> Result<Self> {
        if !(area_mm2.is_finite() && area_mm2 > 0.0) {
            return Err(Error::invalid(format!(
                "area_mm2 must be > 0, got {area_mm2}"
            )));
        }
        if !(height_mm.is_finite() && height_mm > 0.0) {
            return Err(Error::invalid(format!(
                "height_mm must be > 0, got {height_mm}"
            )));
        }
        if points.is_empty() {
            return Err(Error::empty("force-displacement log has no points"));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.force_n.is_finite() && p.displacement_mm.is_finite()) {
                return Err(Error::NonFinite(format!("point {i}")));
            }
            if p.force_n < 0.0 || p.displacement_mm < 0.0 {
                return Err(Error::invalid(format!(
                    "point {i}: force and displacement must be >= 0"
                )));
            }
        }
        if let Some(i) = loading_violation(&points) {
            return Err(Error::invalid(format!(
                "non-monotonic loading at point {i}"
            )));
        }
        Ok(Self {
            points,
            area_mm2,
            height_mm,
        })
    }

    /// Index of the last point of the loading segment (the first force peak).
    pub fn peak_index(&self) -> usize {
        self.points
            .windows(2)
            .position(|w| w[1].force_n < w[0].force_n)
            .unwrap_or(self.points.len() - 1)
    }
}

fn loading_violation(points: &[ForceDisplacementPoint]) -> Option<usize> {
    let mut unloading = false;
    for (i, w) in points.windows(2).enumerate() {
        if w[1].force_n < w[0].force_n {
            unloading = true;
        } else if unloading && w[1].force_n > w[0].force_n {
            return Some(i + 1);
        }
    }
    None
}

/// Parses `force_n, displacement_mm` rows.
pub fn parse_force_displacement(
    text: &str,
    area_mm2: f64,
    height_mm: f64,
) -> Result<ForceDisplacementLog> {
    let raw = read_raw(text)?;
    let mut points = Vec::with_capacity(raw.rows.len());
    for row in &raw.rows {
        check_width(row, 2)?;
        points.push(ForceDisplacementPoint {
            force_n: numeric_cell(row, 0)?,
            displacement_mm: numeric_cell(row, 1)?,
        });
    }
    if let Some(i) = loading_violation(&points) {
        return Err(Error::InvalidRow {
            row: raw.rows[i].line,
            message: "non-monotonic loading".into(),
        });
    }
    ForceDisplacementLog::new(points, area_mm2, height_mm)
}

pub fn load_force_displacement(
    path: impl AsRef<Path>,
    area_mm2: f64,
    height_mm: f64,
) -> Result<ForceDisplacementLog> {
    parse_force_displacement(&std::fs::read_to_string(path)?, area_mm2, height_mm)
}

pub fn write_force_displacement(log: &ForceDisplacementLog) -> String {
    let mut out = String::from("force_n,displacement_mm\n");
    for p in &log.points {
        let _ = writeln!(out, "{},{}", p.force_n, p.displacement_mm);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shape_preserved() {
        let mut text = String::new();
        for i in 0..100 {
            text.push_str(&format!(
                "{},{},{}\n",
                (i % 7) as f64 * 0.1,
                -(i as f64),
                3.5
            ));
        }
        let rec = parse_recording(&text, 800.0, Units::MilliVolt).unwrap();
        assert_eq!(rec.channels().len(), 3);
        assert_eq!(rec.len(), 100);
        assert_eq!(rec.rate_hz(), 800.0);
    }

    #[test]
    fn decimal_comma() {
        assert_eq!(parse_number("1,0003"), Some(1.0003));
        assert_eq!(parse_number("1,5"), parse_number("1.5"));
        let rec = parse_recording("a;b\n1,0003;2\n0,5;-1,25\n", 800.0, Units::MilliVolt).unwrap();
        assert_eq!(rec.channels()[0].samples, vec![1.0003, 0.5]);
        assert_eq!(rec.channels()[1].samples, vec![2.0, -1.25]);
    }

    #[test]
    fn ragged_row_reports_line() {
        let mut text = String::from("ch1,ch2,ch3\n");
        for i in 2..=20 {
            if i == 17 {
                text.push_str("1,2\n");
            } else {
                text.push_str("1,2,3\n");
            }
        }
        let err = parse_recording(&text, 800.0, Units::MilliVolt).unwrap_err();
        assert!(err.to_string().contains("ragged row 17"), "{err}");
    }

    #[test]
    fn non_numeric_cell_has_coordinates() {
        let err = parse_recording("1,2\n3,x\n", 10.0, Units::Volt).unwrap_err();
        match err {
            Error::NonNumeric { row, column, .. } => assert_eq!((row, column), (2, 2)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_file_rejected() {
        assert!(parse_recording("", 10.0, Units::Volt).is_err());
        assert!(parse_recording("\n\n", 10.0, Units::Volt).is_err());
        assert!(parse_repetition_table("").is_err());
    }

    #[test]
    fn time_column_detected_and_dropped() {
        let rec = parse_recording(
            "time_s,emg\r\n0.0,1\r\n0.01,2\r\n0.02,3\r\n",
            100.0,
            Units::MilliVolt,
        )
        .unwrap();
        assert_eq!(rec.channels().len(), 1);
        assert_eq!(rec.channels()[0].samples, vec![1.0, 2.0, 3.0]);

        // headerless: strictly increasing first column
        let rec =
            parse_recording("0,5,1\n1,6,1\n2,5,1\n3,4,1\n", 1000.0, Units::MilliVolt).unwrap();
        assert_eq!(rec.channels().len(), 2);

        let err = parse_recording("t,x\n0,1\n1,1\n2,1\n5,1\n", 1.0, Units::Volt).unwrap_err();
        assert!(err.to_string().contains("non-uniform"), "{err}");
    }

    #[test]
    fn channel_ids_from_header() {
        let rec = parse_recording("ch2;ch4;ch8\n1;2;3\n", 800.0, Units::MilliVolt).unwrap();
        let ids: Vec<u8> = rec.channels().iter().map(|c| c.id).collect();
        assert_eq!(ids, vec![2, 4, 8]);
    }

    const LEAKAGE: &str = "Sensor;1;2;3;4;Mean ± std
1;15,36;15,36;16,98;20,62;17,08 ± 2,15
2;15,77;15,77;19,98;20,39;17,98 ± 2,21
3;15,77;15,77;16,98;18,76;16,82 ± 1,22
4;15,04;15,04;26,68;17,95;18,68 ± 4,77
5;16,01;16,01;24,66;17,95;18,66 ± 3,56
6;17,71;17,71;20,62;17,95;18,50 ± 1,23
7;17,63;21,83;20,38;20,62;20,12 ± 1,54
8;21,83;17,63;24,42;17,95;20,46 ± 2,83
";

    #[test]
    fn leakage_table_shape() {
        let t = parse_repetition_table(LEAKAGE).unwrap();
        assert_eq!(t.rows.len(), 8);
        assert!(t.rows.iter().all(|r| r.len() == 4));
        assert_eq!(t.labels[6], "7");
        assert_eq!(t.rows[7], vec![21.83, 17.63, 24.42, 17.95]);
    }

    #[test]
    fn auxiliary_single_series() {
        let text = "Repetition;Patient auxiliary current
1;135,12
2;135,12
3;170,70
4;152,18
5;73,320
6;63,470
7;59,760
8;59,660
9;93,300
10;67,690
Mean;101,030
";
        let t = parse_repetition_table(text).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].len(), 10);
        assert_eq!(t.rows[0][4], 73.32);
    }

    #[test]
    fn repetition_table_errors() {
        assert!(parse_repetition_table("s,a,b\n1,1,-2\n2,1,1\n").is_err());
        let err = parse_repetition_table("s,a,b\n1,1,2\n2,1,\n").unwrap_err();
        assert!(err.to_string().contains("missing cell"), "{err}");
        let err = parse_repetition_table("s,a,b\n1,1,2\n2,1\n").unwrap_err();
        assert!(err.to_string().contains("missing cell"), "{err}");
    }

    #[test]
    fn sweep_parsing_and_errors() {
        let s = parse_frequency_sweep(
            "stage,f,sim,meas\n4,10,1.0,10.11\n1,10,2,1\n",
            GainScale::Linear,
        )
        .unwrap();
        assert_eq!(s.entries.len(), 2);
        assert_eq!(s.entries[0].measured_gain, 10.11);
        assert!(
            parse_frequency_sweep("4,10,1,2\n4,10,1,3\n", GainScale::Linear)
                .unwrap_err()
                .to_string()
                .contains("duplicate")
        );
        assert!(parse_frequency_sweep("4,10,0,2\n", GainScale::Linear).is_err());
        assert!(parse_frequency_sweep("9,10,1,2\n", GainScale::Linear).is_err());
        let db = parse_frequency_sweep("1,10,20,0\n", GainScale::Decibel).unwrap();
        assert!((db.entries[0].simulated_gain - 10.0).abs() < 1e-12);
        assert!((db.entries[0].measured_gain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn force_displacement_contracts() {
        let log = parse_force_displacement("F,d\n0,0\n10,0.1\n20,0.2\n", 653.33, 10.0).unwrap();
        assert_eq!(log.points.len(), 3);
        let err = parse_force_displacement("0,0\n10,0.1\n5,0.15\n20,0.2\n", 1.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("non-monotonic loading"), "{err}");
        assert!(parse_force_displacement("0,0\n10,0.1\n", 0.0, 1.0).is_err());
        assert!(parse_force_displacement("0,0\n10,0.1\n", 1.0, 0.0).is_err());
        // loading then unloading is fine
        let log = parse_force_displacement("0,0\n10,0.1\n20,0.2\n10,0.1\n0,0\n", 1.0, 1.0).unwrap();
        assert_eq!(log.peak_index(), 2);
    }

    proptest! {
        #[test]
        fn recording_round_trip(
            cols in 1usize..=8,
            data in prop::collection::vec(-1e6f64..1e6, 1..200),
        ) {
            let rows = data.len() / cols;
            prop_assume!(rows >= 1);
            let channels = (0..cols)
                .map(|c| ChannelSeries::new(c as u8 + 1, (0..rows).map(|r| data[r * cols + c]).collect()))
                .collect();
            let rec = Recording::new(channels, 800.0, Units::MilliVolt).unwrap();
            let text = write_recording(&rec);
            let back = parse_recording(&text, 800.0, Units::MilliVolt).unwrap();
            prop_assert_eq!(&back, &rec);
            prop_assert_eq!(write_recording(&back), text);
        }

        #[test]
        fn sweep_round_trip(gains in prop::collection::vec((0.01f64..100.0, 0.0f64..100.0), 1..40)) {
            let entries: Vec<SweepEntry> = gains
                .iter()
                .enumerate()
                .map(|(i, &(s, m))| SweepEntry {
                    stage: (i % 8) as u8 + 1,
                    frequency_hz: 10.0 * (i / 8 + 1) as f64,
                    simulated_gain: s,
                    measured_gain: m,
                })
                .collect();
            let sweep = FrequencySweep::new(entries).unwrap();
            let back = parse_frequency_sweep(&write_frequency_sweep(&sweep), GainScale::Linear).unwrap();
            prop_assert_eq!(back, sweep);
        }

        #[test]
        fn comma_and_point_agree(int in 0u32..100000, frac in 0u32..10000) {
            let a = parse_number(&format!("{int},{frac:04}"));
            let b = parse_number(&format!("{int}.{frac:04}"));
            prop_assert_eq!(a, b);
        }
    }
}
