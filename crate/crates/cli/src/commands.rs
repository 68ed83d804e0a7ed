use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use emgvalid_core::agreement::{
    assess_crosstalk, compare_devices, detect_latency, AgreementSection, CompareOptions,
    CrosstalkMatrix, LatencyOptions, LatencyTable, TrailingPolicy, VarConvention,
};
use emgvalid_core::comms::{
    analyze_stream, emulate, AnalyzeOptions, BurstDrop, EmulatorConfig, FaultPlan, SignalSource,
    StreamIntegrityReport,
};
use emgvalid_core::ingest::{
    load_force_displacement, load_frequency_sweep, load_recording, load_repetition_table, GainScale,
};
use emgvalid_core::mech::{assess_elasticity, build_curve, FitMode, MechSection};
use emgvalid_core::model::fmt_dp;
use emgvalid_core::operation::{
    assess_stability, build_error_matrix, FrequencyResponseSection, StabilityReport,
};
use emgvalid_core::report::{
    build_report, ComfortNotes, InspectionChecklist, ReportMetadata, Sections,
};
use emgvalid_core::safety::{
    assess_auxiliary, assess_leakage, MeasurementInput, SafetySection, VerdictBasis,
};
use emgvalid_core::synth::write_fixture_set;
use emgvalid_core::{Units, VerdictLevel};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::CliConfig;
use crate::{
    AnalyzeArgs, Command, CommsCommand, CompareArgs, CrosstalkArgs, EmulateArgs, FreqrespArgs,
    LatencyArgs, MechArgs, ReportArgs, SafetyArgs, StabilityArgs, SynthArgs,
};

/// Destination for artifacts. Without a directory, section JSON goes to stdout
/// and other artifacts are skipped.
struct Out {
    dir: Option<PathBuf>,
    verbose: bool,
}

impl Out {
    fn new(flag: Option<PathBuf>, cfg: &CliConfig, verbose: bool) -> Self {
        Self {
            dir: flag.or_else(|| cfg.out.clone()),
            verbose,
        }
    }

    /// Writes `name` under the output directory and returns its relative path.
    fn artifact(&self, name: &str, contents: &str) -> Result<Option<String>> {
        let Some(dir) = &self.dir else {
            return Ok(None);
        };
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(Some(name.to_string()))
    }

    fn section<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let json = serde_json::to_string_pretty(value)? + "\n";
        match &self.dir {
            Some(_) => {
                self.artifact(name, &json)?;
                if self.verbose {
                    print!("{json}");
                }
            }
            None => print!("{json}"),
        }
        Ok(())
    }
}

pub fn run(command: Command, cfg: &CliConfig, verbose: bool) -> Result<Option<VerdictLevel>> {
    match command {
        Command::Safety(a) => safety(a, cfg, verbose),
        Command::Stability(a) => stability(a, cfg, verbose),
        Command::Freqresp(a) => freqresp(a, cfg, verbose),
        Command::Compare(a) => compare(a, cfg, verbose),
        Command::Latency(a) => latency(a, cfg, verbose),
        Command::Crosstalk(a) => crosstalk(a, cfg, verbose),
        Command::Comms(CommsCommand::Analyze(a)) => comms_analyze(a, cfg, verbose),
        Command::Comms(CommsCommand::Emulate(a)) => comms_emulate(a, cfg),
        Command::Mech(a) => mech(a, cfg, verbose),
        Command::Report(a) => report(a, cfg),
        Command::Synth(a) => synth(a, cfg),
    }
}

fn safety(a: SafetyArgs, cfg: &CliConfig, verbose: bool) -> Result<Option<VerdictLevel>> {
    if a.leakage.is_none() && a.auxiliary.is_none() {
        bail!("safety needs --leakage and/or --auxiliary");
    }
    let t = &cfg.thresholds;
    let input = if a.millivolts {
        MeasurementInput::MilliVolt
    } else {
        MeasurementInput::MicroAmp
    };
    let basis = if a.worst_case {
        VerdictBasis::WorstCase
    } else {
        VerdictBasis::Mean
    };
    let leakage = a
        .leakage
        .as_ref()
        .map(|p| {
            let table =
                load_repetition_table(p).with_context(|| format!("reading {}", p.display()))?;
            Ok::<_, anyhow::Error>(assess_leakage(&table, t, input, basis)?)
        })
        .transpose()?;
    let auxiliary = a
        .auxiliary
        .as_ref()
        .map(|p| {
            let table =
                load_repetition_table(p).with_context(|| format!("reading {}", p.display()))?;
            let mut values: Vec<f64> = table.values().collect();
            if a.millivolts {
                values = values
                    .iter()
                    .map(|&v| emgvalid_core::safety::current_from_voltage(v, t.body_resistance_ohm))
                    .collect::<Result<_, _>>()?;
            }
            Ok::<_, anyhow::Error>(assess_auxiliary(&values, t)?)
        })
        .transpose()?;
    let section = SafetySection::new(leakage, auxiliary)?;

    if let Some(l) = &section.leakage {
        eprintln!(
            "Leakage current (limit {} µA, multiplier {}, basis {:?})",
            l.limit_ua, t.marginal_multiplier, l.basis
        );
        eprintln!("  {:<8} {:>16}  verdict", "sensor", "mean ± sd (µA)");
        for s in &l.per_sensor {
            eprintln!(
                "  {:<8} {:>16}  {}",
                s.sensor,
                format!("{} ± {}", fmt_dp(s.stats.mean, 2), fmt_dp(s.stats.sd, 2)),
                s.verdict.level
            );
        }
    }
    if let Some(x) = &section.auxiliary {
        eprintln!(
            "Auxiliary current: {} ± {} µA (limit {} µA), {}/{} above limit: {}",
            fmt_dp(x.mean_ua, 2),
            fmt_dp(x.sd_ua, 2),
            x.limit_ua,
            x.count_over_limit,
            x.repetitions.len(),
            x.verdict.level
        );
    }
    eprintln!("Safety verdict: {}", section.verdict);
    Out::new(a.out, cfg, verbose).section("safety.json", &section)?;
    Ok(Some(section.verdict))
}

fn stability(a: StabilityArgs, cfg: &CliConfig, verbose: bool) -> Result<Option<VerdictLevel>> {
    let mut reps: Vec<Vec<f64>> = Vec::new();
    for p in &a.inputs {
        let rec = load_recording(p, a.rate, Units::Volt)
            .with_context(|| format!("reading {}", p.display()))?;
        reps.extend(rec.channels().iter().map(|c| c.samples.clone()));
    }
    let r: StabilityReport = assess_stability(&reps)?;
    eprintln!(
        "  {:<10} {:>8} {:>8} {:>8} {:>10}",
        "repetition", "mean", "sd", "cv %", "mean var %"
    );
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| fmt_dp(x, 2));
    for (i, s) in r.per_repetition.iter().enumerate() {
        eprintln!(
            "  {:<10} {:>8} {:>8} {:>8} {:>10}",
            i + 1,
            fmt_dp(s.mean, 4),
            fmt_dp(s.sd, 4),
            opt(s.cv_percent),
            opt(s.mean_variation_percent)
        );
    }
    let m = &r.average_row;
    eprintln!(
        "  {:<10} {:>8} {:>8} {:>8} {:>10}",
        "mean",
        fmt_dp(m.mean, 4),
        fmt_dp(m.sd, 4),
        opt(m.cv_percent),
        opt(m.mean_variation_percent)
    );
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("Stability verdict: {}", r.verdict);
    Out::new(a.out, cfg, verbose).section("stability.json", &r)?;
    Ok(Some(r.verdict))
}

fn freqresp(a: FreqrespArgs, cfg: &CliConfig, verbose: bool) -> Result<Option<VerdictLevel>> {
    let scale = if a.db {
        GainScale::Decibel
    } else {
        GainScale::Linear
    };
    let sweep = load_frequency_sweep(&a.sweep, scale)
        .with_context(|| format!("reading {}", a.sweep.display()))?;
    let matrix = build_error_matrix(&sweep)?;

    // `--out matrix.csv` names the wide matrix; siblings go next to it
    let (out, stem) = match a.out.or_else(|| cfg.out.clone()) {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => {
            let stem = p
                .file_stem()
                .map_or("matrix".into(), |s| s.to_string_lossy().into_owned());
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (
                Out {
                    dir: Some(dir),
                    verbose,
                },
                stem,
            )
        }
        other => (
            Out {
                dir: other,
                verbose,
            },
            "matrix".to_string(),
        ),
    };
    let mut artifacts = Vec::new();
    artifacts.extend(out.artifact(&format!("{stem}.csv"), &matrix.to_csv())?);
    artifacts.extend(out.artifact(&format!("{stem}_long.csv"), &matrix.to_long_csv())?);
    artifacts.extend(out.artifact(&format!("{stem}.svg"), &matrix.to_svg())?);
    let section = FrequencyResponseSection {
        max_abs_error: matrix.max_abs(),
        matrix,
        artifacts,
    };
    eprint!("{}", section.matrix.to_csv());
    if let Some(c) = &section.max_abs_error {
        eprintln!(
            "Largest |error|: {} % at stage {}, {} Hz",
            fmt_dp(c.pe_percent, 2),
            c.stage,
            c.frequency_hz
        );
    }
    out.section("freqresp.json", &section)?;
    Ok(None)
}

fn compare(a: CompareArgs, cfg: &CliConfig, verbose: bool) -> Result<Option<VerdictLevel>> {
    let proto = load_recording(&a.prototype, a.prototype_rate, Units::MilliVolt)
        .with_context(|| format!("reading {}", a.prototype.display()))?;
    let reference = load_recording(&a.reference, a.reference_rate, Units::MilliVolt)
        .with_context(|| format!("reading {}", a.reference.display()))?;
    let defaults = CompareOptions::default();
    let opts = CompareOptions {
        window_ms: a.window_ms.or(cfg.window_ms).unwrap_or(defaults.window_ms),
        overlap_fraction: a
            .overlap
            .or(cfg.overlap)
            .unwrap_or(defaults.overlap_fraction),
        trailing: if a.keep_trailing {
            TrailingPolicy::Keep
        } else {
            TrailingPolicy::Drop
        },
        var_convention: if a.zero_mean_var {
            VarConvention::ZeroMean
        } else {
            VarConvention::MeanCentered
        },
        max_lag_s: a.max_lag_s,
        min_alignment_r: a.min_alignment_r,
        prototype_channel: a.prototype_channel,
        reference_channel: a.reference_channel,
        detrend: a.detrend,
        ..defaults
    };
    let rep = compare_devices(&proto, &reference, &opts)?;
    let out = Out::new(a.out, cfg, verbose);
    let mut artifacts = Vec::new();
    artifacts.extend(out.artifact("bland_altman_points.csv", &rep.bland_altman.points_csv())?);
    artifacts.extend(out.artifact("bland_altman_lines.csv", &rep.bland_altman.lines_csv())?);

    eprintln!(
        "Aligned at lag {} ms (r = {}), {} windows at {} Hz",
        fmt_dp(rep.lag_ms, 1),
        fmt_dp(rep.alignment_r, 3),
        rep.windows,
        rep.common_rate_hz
    );
    eprintln!("  {:<8} {:>12} {:>8}", "feature", "1-MAPE %", "r");
    for f in &rep.features {
        eprintln!(
            "  {:<8} {:>12} {:>8}",
            f.feature.to_string(),
            fmt_dp(f.one_minus_mape_percent, 2),
            fmt_dp(f.pearson_r, 2)
        );
    }
    let b = &rep.bland_altman;
    eprintln!(
        "Bland-Altman (RMS): bias {}, LoA [{}, {}]",
        fmt_dp(b.bias, 4),
        fmt_dp(b.loa_low, 4),
        fmt_dp(b.loa_high, 4)
    );
    let section = AgreementSection {
        comparison: Some(rep),
        artifacts,
        ..AgreementSection::default()
    };
    out.section("compare.json", &section)?;
    Ok(None)
}

fn latency_csv(t: &LatencyTable) -> String {
    let mut s = String::from("event");
    let channels: Vec<u8> = t
        .events
        .first()
        .map(|e| e.crossings.iter().map(|c| c.channel).collect())
        .unwrap_or_default();
    for c in &channels {
        let _ = write!(s, ",ch{c}_ms");
    }
    for (a, b) in &t.pairs {
        let _ = write!(s, ",delta_{a}_{b}_ms");
    }
    s.push('\n');
    let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for e in &t.events {
        let _ = write!(s, "{}", e.event_id);
        for c in &e.crossings {
            let _ = write!(s, ",{}", cell(c.time_ms));
        }
        for d in &e.deltas {
            let _ = write!(s, ",{}", cell(d.delta_ms));
        }
        s.push('\n');
    }
    s
}

fn latency(a: LatencyArgs, cfg: &CliConfig, verbose: bool) -> Result<Option<VerdictLevel>> {
    let rec = load_recording(&a.recording, a.rate, Units::MilliVolt)
        .with_context(|| format!("reading {}", a.recording.display()))?;
    let pairs = if a.pairs.is_empty() {
        cfg.pairs.clone().unwrap_or_default()
    } else {
        a.pairs
    };
    let opts = LatencyOptions {
        threshold_fraction: a.threshold,
        refractory_ms: a.refractory_ms,
        pairs,
        tolerance_ms: a.tolerance_ms,
    };
    let table = detect_latency(&rec, &opts)?;
    let csv = latency_csv(&table);
    eprint!("{csv}");
    eprintln!(
        "Max delta {} ms (tolerance {} ms), missing crossings {}: {}",
        table.max_delta_ms.map_or("-".into(), |d| fmt_dp(d, 2)),
        fmt_dp(table.tolerance_ms, 2),
        table.missing_crossings,
        table.verdict
    );
    let out = Out::new(a.out, cfg, verbose);
    let artifacts = out.artifact("latency.csv", &csv)?.into_iter().collect();
    let verdict = table.verdict;
    let section = AgreementSection {
        latency: Some(table),
        artifacts,
        ..AgreementSection::default()
    };
    out.section("latency.json", &section)?;
    Ok(Some(verdict))
}

fn stimulated_channel(path: &Path) -> Option<u8> {
    let stem = path.file_stem()?.to_string_lossy();
    let digits: String = stem
        .chars()
        .rev()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.chars().rev().collect::<String>().parse().ok()
}

fn crosstalk_csv(m: &CrosstalkMatrix) -> String {
    let mut s = String::from("stimulated");
    for c in &m.channels {
        let _ = write!(s, ",ch{c}_db");
    }
    s.push('\n');
    for (stim, row) in m.stimulated.iter().zip(&m.db) {
        let _ = write!(s, "{stim}");
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

fn crosstalk(a: CrosstalkArgs, cfg: &CliConfig, verbose: bool) -> Result<Option<VerdictLevel>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.dir)
        .with_context(|| format!("reading directory {}", a.dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no CSV files in {}", a.dir.display());
    }
    let mut recs = Vec::with_capacity(files.len());
    for f in &files {
        let stim = stimulated_channel(f).with_context(|| {
            format!(
                "cannot tell the stimulated channel from file name {}",
                f.display()
            )
        })?;
        let rec = load_recording(f, a.rate, Units::MilliVolt)
            .with_context(|| format!("reading {}", f.display()))?;
        recs.push((stim, rec));
    }
    let m = assess_crosstalk(&recs)?;
    let csv = crosstalk_csv(&m);
    eprint!("{csv}");
    eprintln!(
        "Worst coupling: {} dB",
        m.worst_db.map_or("-".into(), |d| fmt_dp(d, 1))
    );
    let out = Out::new(a.out, cfg, verbose);
    let artifacts = out.artifact("crosstalk.csv", &csv)?.into_iter().collect();
    let section = AgreementSection {
        crosstalk: Some(m),
        artifacts,
        ..AgreementSection::default()
    };
    out.section("crosstalk.json", &section)?;
    Ok(None)
}

fn comms_analyze(a: AnalyzeArgs, cfg: &CliConfig, verbose: bool) -> Result<Option<VerdictLevel>> {
    let bytes = std::fs::read(&a.dump).with_context(|| format!("reading {}", a.dump.display()))?;
    let opts = AnalyzeOptions {
        nominal_rate_hz: a.rate,
        duration_s: a.duration,
        tolerance_frames: a.tolerance_frames,
    };
    let r: StreamIntegrityReport = analyze_stream(&bytes, &opts)?;
    eprintln!(
        "expected {} received {} lost {} corrupted {} resyncs {} max gap {} ms: {}",
        r.expected_frames,
        r.received_ok,
        r.lost,
        r.corrupted,
        r.resyncs,
        r.max_inter_frame_gap_ms
            .map_or("-".into(), |g| g.to_string()),
        r.verdict
    );
    Out::new(a.out, cfg, verbose).section("comms.json", &r)?;
    Ok(Some(r.verdict))
}

fn comms_emulate(a: EmulateArgs, cfg: &CliConfig) -> Result<Option<VerdictLevel>> {
    let dump = match (&a.out, &cfg.out) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => dir.join("dump.bin"),
        (None, None) => bail!("comms emulate needs --out <FILE>"),
    };
    let plan = FaultPlan {
        drop_probability: a.drop,
        corrupt_probability: a.corrupt,
        jitter_ms: a.jitter_ms,
        burst_drop: a.burst.map(|(start_frame, length)| BurstDrop {
            start_frame,
            length,
        }),
        seed: a.seed,
    };
    let config = EmulatorConfig {
        nominal_rate_hz: a.rate,
        start_seq: a.start_seq,
        start_t_ms: 0,
    };
    let s = emulate(a.frames, &SignalSource::Ramp, &plan, &config)?;
    if let Some(parent) = dump.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&dump, &s.bytes).with_context(|| format!("writing {}", dump.display()))?;
    if let Some(ledger) = &a.ledger {
        std::fs::write(ledger, serde_json::to_string_pretty(&s.ledger)? + "\n")
            .with_context(|| format!("writing {}", ledger.display()))?;
    }
    eprintln!(
        "{} frames, {} dropped, {} corrupted, {} bytes -> {}",
        a.frames,
        s.ledger.dropped(),
        s.ledger.corrupted(),
        s.bytes.len(),
        dump.display()
    );
    Ok(None)
}

fn mech(a: MechArgs, cfg: &CliConfig, verbose: bool) -> Result<Option<VerdictLevel>> {
    let log = load_force_displacement(&a.log, a.area_mm2, a.height_mm)
        .with_context(|| format!("reading {}", a.log.display()))?;
    let curve = build_curve(&log)?;
    let mode = if a.anchor_origin {
        FitMode::AnchorOrigin
    } else {
        FitMode::FreeIntercept
    };
    let assessment = assess_elasticity(&curve, &cfg.thresholds, mode)?;
    let out = Out::new(a.out, cfg, verbose);
    let artifacts = out
        .artifact("curve.csv", &curve.to_csv())?
        .into_iter()
        .collect();
    eprintln!(
        "max stress {} MPa at {} N, r² {}, modulus {} MPa, safety factor {} (yield {} MPa), elastic {}: {}",
        fmt_dp(assessment.max_stress_mpa, 2),
        fmt_dp(assessment.max_force_n, 2),
        fmt_dp(assessment.linear_r2, 4),
        fmt_dp(assessment.modulus_estimate_mpa, 2),
        fmt_dp(assessment.safety_factor, 1),
        assessment.yield_low_mpa,
        assessment.verdict_elastic,
        assessment.verdict
    );
    let verdict = assessment.verdict;
    out.section(
        "mech.json",
        &MechSection {
            assessment,
            artifacts,
        },
    )?;
    Ok(Some(verdict))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn report(a: ReportArgs, cfg: &CliConfig) -> Result<Option<VerdictLevel>> {
    let mut agreement: Option<AgreementSection> = None;
    for p in &a.agreement {
        let part: AgreementSection = read_json(p)?;
        agreement = Some(match agreement {
            Some(acc) => acc.merge(part),
            None => part,
        });
    }
    let sections = Sections {
        safety: a.safety.as_deref().map(read_json).transpose()?,
        stability: a.stability.as_deref().map(read_json).transpose()?,
        freq_response: a.freqresp.as_deref().map(read_json).transpose()?,
        agreement,
        comms: a.comms.as_deref().map(read_json).transpose()?,
        mechanical: a.mech.as_deref().map(read_json).transpose()?,
    };
    let metadata = ReportMetadata {
        device: a.device,
        date: a.date,
        operator: a.operator,
        thresholds: cfg.thresholds.clone(),
    };
    let checklist = InspectionChecklist {
        insulation_enclosed: a.insulation_enclosed,
        electrodes_housed: a.electrodes_housed,
    };
    let comfort = ComfortNotes {
        notes: a.comfort_notes,
        skin_marks_observed: a.skin_marks,
        readjustment_needed: a.readjustment,
    };
    let r = build_report(metadata, sections, checklist, comfort)?;
    match a.out.or_else(|| cfg.out.clone()) {
        Some(dir) => {
            r.write_to(&dir)
                .with_context(|| format!("writing report to {}", dir.display()))?;
            for s in &r.section_verdicts {
                eprintln!(
                    "  {:<14} {}",
                    s.section,
                    s.verdict
                        .map_or("informational".to_string(), |v| v.to_string())
                );
            }
            eprintln!("Overall verdict: {}", r.overall_verdict);
        }
        None => print!("{}", r.to_markdown()),
    }
    Ok(Some(r.overall_verdict))
}

fn synth(a: SynthArgs, cfg: &CliConfig) -> Result<Option<VerdictLevel>> {
    let Some(dir) = a.out.or_else(|| cfg.out.clone()) else {
        bail!("synth needs --out <DIR>");
    };
    let files = write_fixture_set(&dir, a.seed)?;
    for f in &files {
        eprintln!("{}", f.strip_prefix(&dir).unwrap_or(f).display());
    }
    Ok(None)
}
