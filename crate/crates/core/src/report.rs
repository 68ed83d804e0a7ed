//! Consolidated validation report: JSON document plus Markdown rendering.
//!
//! Output is a pure function of the inputs. Nothing here reads the clock or
//! the environment, and every collection is emitted in a fixed order.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agreement::AgreementSection;
use crate::comms::StreamIntegrityReport;
use crate::error::{Error, Result};
use crate::mech::MechSection;
use crate::model::{fmt_dp, ComplianceThresholds, VerdictLevel};
use crate::operation::{stage_label, FrequencyResponseSection, StabilityReport};
use crate::safety::SafetySection;
use crate::TOOLKIT_VERSION;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportMetadata {
    pub device: String,
    /// Free-form, supplied by the operator.
    pub date: Option<String>,
    pub operator: Option<String>,
    pub thresholds: ComplianceThresholds,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sections {
    pub safety: Option<SafetySection>,
    pub stability: Option<StabilityReport>,
    pub freq_response: Option<FrequencyResponseSection>,
    pub agreement: Option<AgreementSection>,
    pub comms: Option<StreamIntegrityReport>,
    pub mechanical: Option<MechSection>,
}

impl Sections {
    pub fn count(&self) -> usize {
        [
            self.safety.is_some(),
            self.stability.is_some(),
            self.freq_response.is_some(),
            self.agreement.as_ref().is_some_and(|a| !a.is_empty()),
            self.comms.is_some(),
            self.mechanical.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count()
    }

    /// Present sections in report order. `None` marks an informational section.
    fn verdicts(&self) -> Vec<SectionVerdict> {
        let mut out = Vec::new();
        let mut push = |name: &str, v: Option<VerdictLevel>| {
            out.push(SectionVerdict {
                section: name.to_string(),
                verdict: v,
            })
        };
        if let Some(s) = &self.safety {
            push("safety", Some(s.verdict));
        }
        if let Some(s) = &self.stability {
            push("stability", Some(s.verdict));
        }
        if self.freq_response.is_some() {
            push("freq_response", None);
        }
        if let Some(a) = self.agreement.as_ref().filter(|a| !a.is_empty()) {
            push("agreement", a.verdict());
        }
        if let Some(c) = &self.comms {
            push("comms", Some(c.verdict));
        }
        if let Some(m) = &self.mechanical {
            push("mechanical", Some(m.assessment.verdict));
        }
        out
    }
}

/// Physical-inspection entries. Unset items are not judged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InspectionChecklist {
    pub insulation_enclosed: Option<bool>,
    pub electrodes_housed: Option<bool>,
}

impl InspectionChecklist {
    fn items(&self) -> [(&'static str, Option<bool>); 2] {
        [
            ("insulation_enclosed", self.insulation_enclosed),
            ("electrodes_housed", self.electrodes_housed),
        ]
    }

    fn verdict(&self) -> Option<VerdictLevel> {
        let answered: Vec<bool> = self.items().iter().filter_map(|(_, v)| *v).collect();
        if answered.is_empty() {
            None
        } else if answered.iter().all(|&b| b) {
            Some(VerdictLevel::Pass)
        } else {
            Some(VerdictLevel::Fail)
        }
    }
}

/// Qualitative wear test; recorded, never scored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComfortNotes {
    pub notes: Option<String>,
    pub skin_marks_observed: Option<bool>,
    pub readjustment_needed: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionVerdict {
    pub section: String,
    pub verdict: Option<VerdictLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub toolkit_version: String,
    pub metadata: ReportMetadata,
    pub sections: Sections,
    pub checklist: InspectionChecklist,
    pub comfort: ComfortNotes,
    pub section_verdicts: Vec<SectionVerdict>,
    pub overall_verdict: VerdictLevel,
    pub verdict_notes: Vec<String>,
}

pub fn build_report(
    metadata: ReportMetadata,
    sections: Sections,
    checklist: InspectionChecklist,
    comfort: ComfortNotes,
) -> Result<ValidationReport> {
    if sections.count() == 0 {
        return Err(Error::empty("report needs at least one section"));
    }
    metadata.thresholds.validate()?;
    let mut section_verdicts = sections.verdicts();
    if let Some(v) = checklist.verdict() {
        section_verdicts.push(SectionVerdict {
            section: "checklist".into(),
            verdict: Some(v),
        });
    }
    let overall_verdict = VerdictLevel::worst(section_verdicts.iter().filter_map(|s| s.verdict));
    let verdict_notes = explain(&section_verdicts, &checklist, overall_verdict);
    Ok(ValidationReport {
        schema_version: SCHEMA_VERSION,
        toolkit_version: TOOLKIT_VERSION.to_string(),
        metadata,
        sections,
        checklist,
        comfort,
        section_verdicts,
        overall_verdict,
        verdict_notes,
    })
}

fn explain(
    verdicts: &[SectionVerdict],
    checklist: &InspectionChecklist,
    overall: VerdictLevel,
) -> Vec<String> {
    let mut notes = Vec::new();
    let at = |level: VerdictLevel| -> Vec<&str> {
        verdicts
            .iter()
            .filter(|s| s.verdict == Some(level))
            .map(|s| s.section.as_str())
            .collect()
    };
    match overall {
        VerdictLevel::Pass => notes.push("overall PASS: every judged section passed".to_string()),
        VerdictLevel::Marginal => notes.push(format!(
            "overall MARGINAL: no section failed, but {} exceeded a limit within the marginal band",
            at(VerdictLevel::Marginal).join(", ")
        )),
        VerdictLevel::Fail => notes.push(format!(
            "overall FAIL: {} failed",
            at(VerdictLevel::Fail).join(", ")
        )),
    }
    let informational: Vec<&str> = verdicts
        .iter()
        .filter(|s| s.verdict.is_none())
        .map(|s| s.section.as_str())
        .collect();
    if !informational.is_empty() {
        notes.push(format!(
            "informational, not judged: {}",
            informational.join(", ")
        ));
    }
    for (name, v) in checklist.items() {
        if v == Some(false) {
            notes.push(format!("inspection item {name} not satisfied"));
        }
    }
    notes
}

impl ValidationReport {
    /// Pretty JSON with a trailing newline. Field order is fixed by the schema.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes `report.json` and `report.md` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        std::fs::write(dir.join("report.md"), self.to_markdown())?;
        Ok(())
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let m = &self.metadata;
        let _ = writeln!(md, "# Validation report: {}\n", or_dash(Some(&m.device)));
        let _ = writeln!(md, "- Date: {}", or_dash(m.date.as_deref()));
        let _ = writeln!(md, "- Operator: {}", or_dash(m.operator.as_deref()));
        let _ = writeln!(
            md,
            "- Toolkit {} (report schema {})",
            self.toolkit_version, self.schema_version
        );
        let _ = writeln!(md, "- **Overall verdict: {}**\n", self.overall_verdict);
        for n in &self.verdict_notes {
            let _ = writeln!(md, "> {n}");
        }
        md.push('\n');

        md.push_str("| Section | Verdict |\n|---|---|\n");
        for s in &self.section_verdicts {
            let v = s
                .verdict
                .map_or("informational".to_string(), |v| v.to_string());
            let _ = writeln!(md, "| {} | {} |", s.section, v);
        }
        md.push('\n');

        let s = &self.sections;
        if let Some(safety) = &s.safety {
            render_safety(&mut md, safety);
        }
        if let Some(st) = &s.stability {
            render_stability(&mut md, st);
        }
        if let Some(fr) = &s.freq_response {
            render_freq(&mut md, fr);
        }
        if let Some(a) = &s.agreement {
            render_agreement(&mut md, a);
        }
        if let Some(c) = &s.comms {
            render_comms(&mut md, c);
        }
        if let Some(mech) = &s.mechanical {
            render_mech(&mut md, mech);
        }
        render_inspection(&mut md, &self.checklist, &self.comfort);
        render_thresholds(&mut md, &m.thresholds);
        md
    }
}

fn or_dash(s: Option<&str>) -> &str {
    match s {
        Some(v) if !v.is_empty() => v,
        _ => "-",
    }
}

fn opt_dp(v: Option<f64>, dp: u32) -> String {
    v.map_or("-".to_string(), |x| fmt_dp(x, dp))
}

fn yes_no(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "yes",
        Some(false) => "no",
        None => "-",
    }
}

fn artifacts(md: &mut String, list: &[String]) {
    if !list.is_empty() {
        let _ = writeln!(md, "Plot data: {}\n", list.join(", "));
    }
}

fn render_safety(md: &mut String, s: &SafetySection) {
    md.push_str("## Electrical safety\n\n");
    if let Some(l) = &s.leakage {
        let reps = l
            .per_sensor
            .iter()
            .map(|p| p.currents_ua.len())
            .max()
            .unwrap_or(0);
        let _ = writeln!(
            md,
            "### Leakage current (µA), limit {} µA\n",
            fmt_dp(l.limit_ua, 0)
        );
        md.push_str("| Sensor |");
        for i in 1..=reps {
            let _ = write!(md, " Rep {i} |");
        }
        md.push_str(" Mean ± SD | Verdict |\n|---|");
        md.push_str(&"---|".repeat(reps + 2));
        md.push('\n');
        for p in &l.per_sensor {
            let _ = write!(md, "| {} |", p.sensor);
            for i in 0..reps {
                let _ = write!(md, " {} |", opt_dp(p.currents_ua.get(i).copied(), 2));
            }
            let _ = writeln!(
                md,
                " {} ± {} | {} |",
                fmt_dp(p.stats.mean, 2),
                fmt_dp(p.stats.sd, 2),
                p.verdict.level
            );
        }
        md.push('\n');
    }
    if let Some(a) = &s.auxiliary {
        let _ = writeln!(
            md,
            "### Patient auxiliary current (µA), limit {} µA\n",
            fmt_dp(a.limit_ua, 0)
        );
        md.push_str("| Repetition | Current |\n|---|---|\n");
        for (i, v) in a.repetitions.iter().enumerate() {
            let _ = writeln!(md, "| {} | {} |", i + 1, fmt_dp(*v, 2));
        }
        let _ = writeln!(
            md,
            "| Mean ± SD | {} ± {} |\n\nAbove limit: {} of {}. Verdict: {}.\n",
            fmt_dp(a.mean_ua, 2),
            fmt_dp(a.sd_ua, 2),
            a.count_over_limit,
            a.repetitions.len(),
            a.verdict.level
        );
    }
}

fn render_stability(md: &mut String, s: &StabilityReport) {
    md.push_str("## Baseline stability\n\n");
    md.push_str(
        "| Repetition | Mean | SD | CV (%) | Mean variation (%) |\n|---|---|---|---|---|\n",
    );
    for (i, r) in s.per_repetition.iter().enumerate() {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            i + 1,
            fmt_dp(r.mean, 4),
            fmt_dp(r.sd, 4),
            opt_dp(r.cv_percent, 2),
            opt_dp(r.mean_variation_percent, 2)
        );
    }
    let a = &s.average_row;
    let _ = writeln!(
        md,
        "| Mean | {} | {} | {} | {} |\n",
        fmt_dp(a.mean, 4),
        fmt_dp(a.sd, 4),
        opt_dp(a.cv_percent, 2),
        opt_dp(a.mean_variation_percent, 2)
    );
    for w in &s.warnings {
        let _ = writeln!(md, "Warning: {w}\n");
    }
}

fn render_freq(md: &mut String, f: &FrequencyResponseSection) {
    let m = &f.matrix;
    md.push_str("## Frequency response error (%)\n\n| Stage |");
    for hz in &m.frequencies_hz {
        let _ = write!(md, " {hz} Hz |");
    }
    md.push_str("\n|---|");
    md.push_str(&"---|".repeat(m.frequencies_hz.len()));
    md.push('\n');
    for (stage, row) in m.stages.iter().zip(&m.errors_percent) {
        let _ = write!(md, "| {} {} |", stage, stage_label(*stage));
        for v in row {
            let _ = write!(md, " {} |", opt_dp(*v, 2));
        }
        md.push('\n');
    }
    md.push('\n');
    if let Some(c) = &f.max_abs_error {
        let _ = writeln!(
            md,
            "Largest |error|: {} % at stage {}, {} Hz.\n",
            fmt_dp(c.pe_percent, 2),
            c.stage,
            c.frequency_hz
        );
    }
    artifacts(md, &f.artifacts);
}

fn render_agreement(md: &mut String, a: &AgreementSection) {
    md.push_str("## Agreement with reference device\n\n");
    if let Some(c) = &a.comparison {
        let _ = writeln!(
            md,
            "Common rate {} Hz, lag {} ms, alignment r = {}, {} windows.\n",
            c.common_rate_hz,
            fmt_dp(c.lag_ms, 1),
            fmt_dp(c.alignment_r, 2),
            c.windows
        );
        md.push_str("| Feature | 1−MAPE (%) | r |\n|---|---|---|\n");
        for f in &c.features {
            let _ = writeln!(
                md,
                "| {} | {} | {} |",
                f.feature,
                fmt_dp(f.one_minus_mape_percent, 2),
                fmt_dp(f.pearson_r, 2)
            );
        }
        let b = &c.bland_altman;
        let _ = writeln!(
            md,
            "\nBland–Altman (RMS): bias {}, limits of agreement [{}, {}], {} % within.\n",
            fmt_dp(b.bias, 4),
            fmt_dp(b.loa_low, 4),
            fmt_dp(b.loa_high, 4),
            fmt_dp(b.fraction_within_loa * 100.0, 1)
        );
    }
    if let Some(l) = &a.latency {
        let chans: Vec<u8> = l
            .events
            .first()
            .map(|e| e.crossings.iter().map(|c| c.channel).collect())
            .unwrap_or_default();
        let _ = writeln!(
            md,
            "### Multichannel latency (ms), tolerance {} ms\n",
            fmt_dp(l.tolerance_ms, 2)
        );
        md.push_str("| Event |");
        for c in &chans {
            let _ = write!(md, " Ch {c} |");
        }
        for (x, y) in &l.pairs {
            let _ = write!(md, " Δ({x},{y}) |");
        }
        md.push_str("\n|---|");
        md.push_str(&"---|".repeat(chans.len() + l.pairs.len()));
        md.push('\n');
        for e in &l.events {
            let _ = write!(md, "| {} |", e.event_id);
            for c in &e.crossings {
                let _ = write!(md, " {} |", opt_dp(c.time_ms, 0));
            }
            for d in &e.deltas {
                let _ = write!(md, " {} |", opt_dp(d.delta_ms, 0));
            }
            md.push('\n');
        }
        let _ = writeln!(
            md,
            "\nMax delta {} ms, missing crossings {}. Verdict: {}.\n",
            opt_dp(l.max_delta_ms, 2),
            l.missing_crossings,
            l.verdict
        );
    }
    if let Some(x) = &a.crosstalk {
        md.push_str("### Crosstalk (dB)\n\n| Stimulated |");
        for c in &x.channels {
            let _ = write!(md, " Ch {c} |");
        }
        md.push_str("\n|---|");
        md.push_str(&"---|".repeat(x.channels.len()));
        md.push('\n');
        for (s, row) in x.stimulated.iter().zip(&x.db) {
            let _ = write!(md, "| {s} |");
            for v in row {
                let _ = write!(md, " {} |", fmt_dp(*v, 1));
            }
            md.push('\n');
        }
        let _ = writeln!(md, "\nWorst coupling: {} dB.\n", opt_dp(x.worst_db, 1));
    }
    artifacts(md, &a.artifacts);
}

fn render_comms(md: &mut String, c: &StreamIntegrityReport) {
    md.push_str("## Communication stream\n\n| Metric | Value |\n|---|---|\n");
    let rows: [(&str, String); 9] = [
        ("Nominal rate (Hz)", c.nominal_rate_hz.to_string()),
        ("Duration (s)", c.duration_s.to_string()),
        ("Expected frames", c.expected_frames.to_string()),
        ("Received frames", c.received_ok.to_string()),
        ("Lost frames", c.lost.to_string()),
        ("Corrupted frames", c.corrupted.to_string()),
        ("Resyncs", c.resyncs.to_string()),
        (
            "Max inter-frame gap (ms)",
            c.max_inter_frame_gap_ms
                .map_or("-".to_string(), |g| g.to_string()),
        ),
        ("Verdict", c.verdict.to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(md, "| {k} | {v} |");
    }
    md.push('\n');
}

fn render_mech(md: &mut String, s: &MechSection) {
    let a = &s.assessment;
    md.push_str("## Mechanical\n\n| Metric | Value |\n|---|---|\n");
    let _ = writeln!(md, "| Max force (N) | {} |", fmt_dp(a.max_force_n, 2));
    let _ = writeln!(md, "| Max stress (MPa) | {} |", fmt_dp(a.max_stress_mpa, 2));
    let _ = writeln!(md, "| Linear fit r² | {} |", fmt_dp(a.linear_r2, 4));
    let _ = writeln!(
        md,
        "| Modulus estimate (MPa) | {} |",
        fmt_dp(a.modulus_estimate_mpa, 2)
    );
    let _ = writeln!(
        md,
        "| Safety factor (yield {} MPa) | {} |",
        fmt_dp(a.yield_low_mpa, 0),
        fmt_dp(a.safety_factor, 1)
    );
    let _ = writeln!(md, "| Residual strain | {} |", opt_dp(a.residual_strain, 4));
    let _ = writeln!(md, "| Elastic | {} |", yes_no(Some(a.verdict_elastic)));
    let _ = writeln!(md, "| Verdict | {} |\n", a.verdict);
    artifacts(md, &s.artifacts);
}

fn render_inspection(md: &mut String, c: &InspectionChecklist, comfort: &ComfortNotes) {
    md.push_str("## Inspection and comfort\n\n| Item | Value |\n|---|---|\n");
    for (name, v) in c.items() {
        let _ = writeln!(md, "| {name} | {} |", yes_no(v));
    }
    let _ = writeln!(
        md,
        "| skin_marks_observed | {} |",
        yes_no(comfort.skin_marks_observed)
    );
    let _ = writeln!(
        md,
        "| readjustment_needed | {} |",
        yes_no(comfort.readjustment_needed)
    );
    md.push('\n');
    if let Some(n) = comfort.notes.as_deref().filter(|n| !n.is_empty()) {
        let _ = writeln!(md, "Comfort notes: {n}\n");
    }
}

fn render_thresholds(md: &mut String, t: &ComplianceThresholds) {
    let _ = writeln!(
        md,
        "## Configuration\n\nLeakage limit {} µA, auxiliary limit {} µA, marginal multiplier {}, \
         yield {}–{} MPa, body resistance {} Ω, elastic r² ≥ {}, residual strain limit {}.",
        t.leakage_limit_ua,
        t.auxiliary_limit_ua,
        t.marginal_multiplier,
        t.petg_yield_mpa.low,
        t.petg_yield_mpa.high,
        t.body_resistance_ohm,
        t.elastic_r2_min,
        t.residual_strain_limit
    );
}
