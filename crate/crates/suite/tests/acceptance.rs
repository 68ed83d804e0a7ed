//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use emgvalid_core::agreement::{
    assess_crosstalk, bland_altman, compare_devices, detect_latency, extract_features, mape,
    pearson, window_features, AgreementSection, CompareOptions, Feature, LatencyOptions,
    TrailingPolicy, VarConvention, WindowPlan,
};
use emgvalid_core::comms::{
    analyze_stream, emulate, AnalyzeOptions, BurstDrop, EmulatorConfig, FaultPlan, SignalSource,
};
use emgvalid_core::ingest::{
    load_force_displacement, load_frequency_sweep, load_recording, load_repetition_table,
    parse_repetition_table, FrequencySweep, GainScale, SweepEntry,
};
use emgvalid_core::mech::{assess_elasticity, build_curve, FitMode, MechSection};
use emgvalid_core::model::{fmt_dp, round_half_up};
use emgvalid_core::operation::{assess_stability, build_error_matrix, FrequencyResponseSection};
use emgvalid_core::report::{
    build_report, ComfortNotes, InspectionChecklist, ReportMetadata, Sections,
};
use emgvalid_core::safety::{
    assess_auxiliary, assess_leakage, MeasurementInput, SafetySection, VerdictBasis,
};
use emgvalid_core::synth::{
    knee_force_displacement, linear_force_displacement, random_onsets_ms, step_event_recording,
    step_recording, write_fixture_set, AUXILIARY_CSV, LEAKAGE_CSV, STEP_EVENT_CHANNELS,
};
use emgvalid_core::{ComplianceThresholds, Recording, Units, VerdictLevel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Published "mean ± std" cells of the leakage table, sensors 1–8.
const LEAKAGE_CELLS: [&str; 8] = [
    "17.08 ± 2.15",
    "17.98 ± 2.21",
    "16.82 ± 1.22",
    "18.68 ± 4.77",
    "18.66 ± 3.56",
    "18.50 ± 1.23",
    "20.12 ± 1.54",
    "20.46 ± 2.83",
];

fn leakage_reproduction() -> Outcome {
    let start = Instant::now();
    let table = parse_repetition_table(LEAKAGE_CSV).map_err(|e| e.to_string())?;
    let a = assess_leakage(
        &table,
        &ComplianceThresholds::default(),
        MeasurementInput::MicroAmp,
        VerdictBasis::Mean,
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut mismatches = Vec::new();
    for (s, want) in a.per_sensor.iter().zip(LEAKAGE_CELLS) {
        let got = format!("{} ± {}", fmt_dp(s.stats.mean, 2), fmt_dp(s.stats.sd, 2));
        if got != want {
            mismatches.push(format!("sensor {}: got {got}, published {want}", s.sensor));
        }
    }
    let fast = elapsed < Duration::from_secs(1);
    let detail = if mismatches.is_empty() {
        format!("8/8 cells match, {elapsed:?}")
    } else {
        format!(
            "{}/8 cells match; {}; {elapsed:?}",
            8 - mismatches.len(),
            mismatches.join("; ")
        )
    };
    check(
        mismatches.is_empty() && fast && a.per_sensor.len() == 8,
        detail,
    )
}

fn auxiliary_values() -> Result<Vec<f64>, String> {
    let t = parse_repetition_table(AUXILIARY_CSV).map_err(|e| e.to_string())?;
    Ok(t.values().collect())
}

fn auxiliary_reproduction() -> Outcome {
    let v = auxiliary_values()?;
    let a = assess_auxiliary(&v, &ComplianceThresholds::default()).map_err(|e| e.to_string())?;
    let mean = fmt_dp(a.mean_ua, 2);
    check(
        mean == "101.03" && a.count_over_limit == 4 && v.len() == 10,
        format!("mean {mean} µA, count_over_limit {}", a.count_over_limit),
    )
}

fn safety_verdicts() -> Outcome {
    let t = ComplianceThresholds::default();
    let table = parse_repetition_table(LEAKAGE_CSV).map_err(|e| e.to_string())?;
    let l = assess_leakage(&table, &t, MeasurementInput::MicroAmp, VerdictBasis::Mean)
        .map_err(|e| e.to_string())?;
    let aux = assess_auxiliary(&auxiliary_values()?, &t).map_err(|e| e.to_string())?;
    let off: Vec<String> = l
        .per_sensor
        .iter()
        .filter(|s| s.verdict.level != VerdictLevel::Marginal)
        .map(|s| {
            format!(
                "sensor {} {} (mean {})",
                s.sensor,
                s.verdict.level,
                fmt_dp(s.stats.mean, 4)
            )
        })
        .collect();
    let aux_ok = aux.verdict.level == VerdictLevel::Marginal;
    let detail = format!(
        "{}/8 sensors MARGINAL{}{}; auxiliary {}",
        8 - off.len(),
        if off.is_empty() { "" } else { "; " },
        off.join(", "),
        aux.verdict.level
    );
    check(off.is_empty() && aux_ok, detail)
}

/// Published pairwise delta columns (ms) for the eleven step events.
const DELTA_2_4: [f64; 11] = [0.0, 0.0, 0.0, 9.0, 9.0, 0.0, 0.0, 0.0, 9.0, 0.0, 0.0];
const DELTA_4_8: [f64; 11] = [0.0; 11];

fn latency_table() -> Outcome {
    let rec = step_event_recording().map_err(|e| e.to_string())?;
    let opts = LatencyOptions {
        pairs: vec![(2, 4), (4, 8)],
        ..LatencyOptions::default()
    };
    let t = detect_latency(&rec, &opts).map_err(|e| e.to_string())?;
    if t.events.len() != DELTA_2_4.len() {
        return Err(format!(
            "{} events detected, expected {}",
            t.events.len(),
            DELTA_2_4.len()
        ));
    }
    let mut wrong = Vec::new();
    for (i, e) in t.events.iter().enumerate() {
        let d24 = e.delta_ms(2, 4);
        let d48 = e.delta_ms(4, 8);
        if d24 != Some(DELTA_2_4[i]) || d48 != Some(DELTA_4_8[i]) {
            wrong.push(format!("event {}: {:?}/{:?}", i + 1, d24, d48));
        }
    }

    // simultaneous steps through a sequential converter: skew < one interval
    let mut worst_ratio: f64 = 0.0;
    let mut trial_failures = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..100u64 {
        let rate = rng.random_range(100.0..2000.0);
        let interval_ms = 1000.0 / rate;
        let onsets = random_onsets_ms(5, 10_000.0, trial);
        let skew_s = 1.0 / (rate * 8.0);
        let chans: Vec<(u8, Vec<f64>)> = STEP_EVENT_CHANNELS
            .iter()
            .map(|&c| (c, onsets.clone()))
            .collect();
        let rec = step_recording(&chans, rate, 10.0, 200.0, skew_s).map_err(|e| e.to_string())?;
        let t = detect_latency(&rec, &LatencyOptions::default()).map_err(|e| e.to_string())?;
        let max = t.max_delta_ms.unwrap_or(f64::INFINITY);
        worst_ratio = worst_ratio.max(max / interval_ms);
        if t.events.len() != 5 || max > interval_ms * (1.0 + 1e-12) {
            trial_failures += 1;
        }
    }
    check(
        wrong.is_empty() && trial_failures == 0,
        format!(
            "{}/11 events match both delta columns; 100 seeded trials: {} over one interval (worst delta {:.3} intervals){}",
            11 - wrong.len(),
            trial_failures,
            worst_ratio,
            if wrong.is_empty() { String::new() } else { format!("; {}", wrong.join(", ")) }
        ),
    )
}

fn brute(x: &[f64]) -> [f64; 5] {
    let n = x.len() as f64;
    let (mut sq, mut abs, mut sum) = (0.0, 0.0, 0.0);
    for v in x {
        sq += v * v;
        abs += v.abs();
        sum += v;
    }
    let m = sum / n;
    let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    let wl: f64 = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    [(sq / n).sqrt(), abs / n, abs, var, wl]
}

fn feature_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..512);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = window_features(&w, VarConvention::MeanCentered);
        let want = brute(&w);
        for k in 0..5 {
            let denom = want[k].abs().max(f64::MIN_POSITIVE);
            worst = worst.max((got[k] - want[k]).abs() / denom);
        }
    }

    // fixed 256-sample windows: IEMG = 256·MAV exactly, so both metrics coincide
    let d = Normal::new(0.0, 1.0).map_err(|e| e.to_string())?;
    let reference: Vec<f64> = (0..20_000).map(|_| d.sample(&mut rng)).collect();
    let test: Vec<f64> = reference
        .iter()
        .map(|x| 0.9 * x + 0.1 * d.sample(&mut rng))
        .collect();
    let plan = WindowPlan::new(256, 0.5, TrailingPolicy::Drop).map_err(|e| e.to_string())?;
    let rf = extract_features(&reference, &plan, VarConvention::MeanCentered)
        .map_err(|e| e.to_string())?;
    let tf =
        extract_features(&test, &plan, VarConvention::MeanCentered).map_err(|e| e.to_string())?;
    let metric = |f: Feature| -> Result<(f64, f64), String> {
        let (r, t) = (&rf[&f].values, &tf[&f].values);
        Ok((
            mape(r, t, 1e-12).map_err(|e| e.to_string())?,
            pearson(r, t).map_err(|e| e.to_string())?,
        ))
    };
    let (m_iemg, r_iemg) = metric(Feature::Iemg)?;
    let (m_mav, r_mav) = metric(Feature::Mav)?;
    let equivalent = m_iemg == m_mav && r_iemg == r_mav;
    check(
        worst <= 1e-12 && equivalent,
        format!(
            "1000 windows, worst relative error {worst:.2e}; IEMG/MAV MAPE {m_iemg} vs {m_mav}, r {r_iemg} vs {r_mav}"
        ),
    )
}

fn bland_altman_properties() -> Outcome {
    let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
    let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
    let off = bland_altman(&b, &a).map_err(|e| e.to_string())?;
    let offset_ok = off.bias == 0.5 && off.loa_high - off.loa_low == 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let d = Normal::new(0.0, 1.0).map_err(|e| e.to_string())?;
    let x: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..10.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| v + d.sample(&mut rng)).collect();
    let g = bland_altman(&y, &x).map_err(|e| e.to_string())?;
    let coverage_ok = (g.fraction_within_loa - 0.95).abs() <= 0.02;

    let mut r = ChaCha8Rng::seed_from_u64(8);
    let sig: Vec<f64> = (0..8000)
        .map(|i| d.sample(&mut r) * (1.0 + (i as f64 / 500.0).sin().abs()))
        .collect();
    let rec = Recording::single(sig, 1000.0, Units::MilliVolt).map_err(|e| e.to_string())?;
    let rep = compare_devices(&rec, &rec, &CompareOptions::default()).map_err(|e| e.to_string())?;
    let identity_ok = rep
        .features
        .iter()
        .all(|f| f.one_minus_mape_percent == 100.0 && (f.pearson_r - 1.0).abs() <= 1e-12);
    check(
        offset_ok && coverage_ok && identity_ok,
        format!(
            "offset bias {} width {}; Gaussian within-LoA {:.3}; self-comparison identity {}",
            off.bias,
            off.loa_high - off.loa_low,
            g.fraction_within_loa,
            if identity_ok { "holds" } else { "broken" }
        ),
    )
}

fn comms_equivalence() -> Outcome {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut wrapped = 0;
    for i in 0..20u64 {
        let n = 12_000u64;
        let start_seq = (65_536 - 4_000 + 250 * i) as u16;
        let plan = FaultPlan {
            drop_probability: 0.05 * i as f64 / 19.0,
            corrupt_probability: 0.02 * ((i * 7) % 20) as f64 / 19.0,
            jitter_ms: (i % 3) as u32,
            burst_drop: (i % 2 == 0).then(|| BurstDrop {
                start_frame: 1_000 + 400 * i,
                length: 10 + 5 * i,
            }),
            seed: 1000 + i,
        };
        let cfg = EmulatorConfig {
            start_seq,
            ..EmulatorConfig::default()
        };
        if u64::from(start_seq) + n > 65_536 {
            wrapped += 1;
        }
        let s = emulate(n, &SignalSource::Ramp, &plan, &cfg).map_err(|e| e.to_string())?;
        let r = analyze_stream(&s.bytes, &AnalyzeOptions::new(800.0, n as f64 / 800.0))
            .map_err(|e| e.to_string())?;
        if (r.lost, r.corrupted, r.received_ok)
            != (
                s.ledger.dropped(),
                s.ledger.corrupted(),
                s.ledger.delivered_intact(),
            )
        {
            mismatches.push(format!(
                "plan {i}: analyzer {}/{} vs ledger {}/{}",
                r.lost,
                r.corrupted,
                s.ledger.dropped(),
                s.ledger.corrupted()
            ));
        }
    }
    let clean = emulate(
        48_000,
        &SignalSource::Ramp,
        &FaultPlan::clean(1),
        &EmulatorConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let r = analyze_stream(&clean.bytes, &AnalyzeOptions::new(800.0, 60.0))
        .map_err(|e| e.to_string())?;
    let clean_ok = r.expected_frames == 48_000 && r.received_ok == 48_000;
    let elapsed = start.elapsed();
    check(
        mismatches.is_empty() && clean_ok && elapsed < Duration::from_secs(10),
        format!(
            "20/20 plans ({wrapped} crossing the sequence wrap) {}; clean stream expected {} received {}; {elapsed:?}",
            if mismatches.is_empty() { "match the ledger".to_string() } else { mismatches.join("; ") },
            r.expected_frames,
            r.received_ok
        ),
    )
}

fn frequency_response() -> Outcome {
    let mut entries = Vec::new();
    for stage in 1..=8u8 {
        for f in [10.0, 50.0, 100.0, 500.0] {
            let g = stage as f64 * 1.7 + f / 100.0;
            entries.push(SweepEntry {
                stage,
                frequency_hz: f,
                simulated_gain: g,
                measured_gain: g,
            });
        }
    }
    let m = build_error_matrix(&FrequencySweep::new(entries).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let all_zero = m.errors_percent.iter().flatten().all(|c| *c == Some(0.0));
    let extreme = build_error_matrix(
        &FrequencySweep::new(vec![SweepEntry {
            stage: 4,
            frequency_hz: 10.0,
            simulated_gain: 1.0,
            measured_gain: 10.11,
        }])
        .map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let pe = extreme.get(4, 10.0).unwrap_or(f64::NAN);
    let pe_ok = round_half_up(pe, 2) == 911.0;
    check(
        all_zero && pe_ok,
        format!(
            "identity sweep all zero: {all_zero}; (1 -> 10.11) gives {} %",
            fmt_dp(pe, 2)
        ),
    )
}

fn mechanical() -> Outcome {
    let t = ComplianceThresholds::default();
    let peak =
        linear_force_displacement(98.0, 1500.0, 653.33, 20.0, 10).map_err(|e| e.to_string())?;
    let c = build_curve(&peak).map_err(|e| e.to_string())?;
    let a = assess_elasticity(&c, &t, FitMode::FreeIntercept).map_err(|e| e.to_string())?;
    let sigma = fmt_dp(c.max_stress_mpa, 2);
    let sf = fmt_dp(a.safety_factor, 1);

    // binary-exact fixture: stress = force, strain = force / 4
    let lin = build_curve(
        &linear_force_displacement(40.0, 4.0, 1.0, 1.0, 11).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let la = assess_elasticity(&lin, &t, FitMode::FreeIntercept).map_err(|e| e.to_string())?;
    let knee = build_curve(
        &knee_force_displacement(98.0, 1500.0, 653.33, 20.0, 25, 0.6, 20.0)
            .map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let ka = assess_elasticity(&knee, &t, FitMode::FreeIntercept).map_err(|e| e.to_string())?;
    check(
        sigma == "0.15"
            && sf == "266.7"
            && la.linear_r2 == 1.0
            && la.verdict_elastic
            && !ka.verdict_elastic,
        format!(
            "σ {sigma} MPa, safety factor {sf}; linear r² {} elastic {}; knee r² {:.4} elastic {}",
            la.linear_r2, la.verdict_elastic, ka.linear_r2, ka.verdict_elastic
        ),
    )
}

fn pipeline(dir: &Path) -> Result<Vec<u8>, Box<dyn std::error::Error>> {
    let fx = dir.join("fx");
    write_fixture_set(&fx, 7)?;
    let t = ComplianceThresholds::default();

    let leakage = assess_leakage(
        &load_repetition_table(fx.join("leakage.csv"))?,
        &t,
        MeasurementInput::MicroAmp,
        VerdictBasis::Mean,
    )?;
    let aux: Vec<f64> = load_repetition_table(fx.join("auxiliary.csv"))?
        .values()
        .collect();
    let safety = SafetySection::new(Some(leakage), Some(assess_auxiliary(&aux, &t)?))?;

    let mut reps = Vec::new();
    for i in 1..=3 {
        let rec = load_recording(fx.join(format!("baseline_rep{i}.csv")), 800.0, Units::Volt)?;
        reps.extend(rec.channels().iter().map(|c| c.samples.clone()));
    }
    let stability = assess_stability(&reps)?;

    let matrix = build_error_matrix(&load_frequency_sweep(
        fx.join("sweep.csv"),
        GainScale::Linear,
    )?)?;
    let freq = FrequencyResponseSection {
        max_abs_error: matrix.max_abs(),
        matrix,
        artifacts: Vec::new(),
    };

    let comparison = compare_devices(
        &load_recording(fx.join("prototype.csv"), 800.0, Units::MilliVolt)?,
        &load_recording(fx.join("reference.csv"), 1000.0, Units::MilliVolt)?,
        &CompareOptions::default(),
    )?;
    let latency = detect_latency(
        &load_recording(fx.join("latency.csv"), 1000.0, Units::MilliVolt)?,
        &LatencyOptions {
            pairs: vec![(2, 4), (4, 8)],
            tolerance_ms: Some(10.0),
            ..LatencyOptions::default()
        },
    )?;
    let mut stimulated = Vec::new();
    for ch in 1..=4u8 {
        let rec = load_recording(
            fx.join(format!("crosstalk/stim_ch{ch}.csv")),
            800.0,
            Units::MilliVolt,
        )?;
        stimulated.push((ch, rec));
    }
    let agreement = AgreementSection {
        comparison: Some(comparison),
        latency: Some(latency),
        crosstalk: Some(assess_crosstalk(&stimulated)?),
        ..AgreementSection::default()
    };

    let comms = analyze_stream(
        &std::fs::read(fx.join("faulty.bin"))?,
        &AnalyzeOptions::new(800.0, 60.0),
    )?;
    let curve = build_curve(&load_force_displacement(
        fx.join("fd_linear.csv"),
        653.33,
        20.0,
    )?)?;
    let mechanical = MechSection {
        assessment: assess_elasticity(&curve, &t, FitMode::FreeIntercept)?,
        artifacts: Vec::new(),
    };

    let report = build_report(
        ReportMetadata {
            device: "prototype".into(),
            date: Some("2025-01-01".into()),
            operator: None,
            thresholds: t,
        },
        Sections {
            safety: Some(safety),
            stability: Some(stability),
            freq_response: Some(freq),
            agreement: Some(agreement),
            comms: Some(comms),
            mechanical: Some(mechanical),
        },
        InspectionChecklist {
            insulation_enclosed: Some(true),
            electrodes_housed: Some(true),
        },
        ComfortNotes::default(),
    )?;
    let out = dir.join("report");
    report.write_to(&out)?;
    Ok(std::fs::read(out.join("report.json"))?)
}

fn determinism() -> Outcome {
    let run = || -> Result<Vec<u8>, String> {
        let d = tempfile::tempdir().map_err(|e| e.to_string())?;
        pipeline(d.path()).map_err(|e| e.to_string())
    };
    let (ra, rb) = (run()?, run()?);
    check(
        ra == rb && !ra.is_empty(),
        format!(
            "report.json {} vs {} bytes, identical: {}",
            ra.len(),
            rb.len(),
            ra == rb
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "leakage mean ± SD cells, population SD, 2 d.p.",
            leakage_reproduction,
        ),
        (
            "auxiliary current mean and count over limit",
            auxiliary_reproduction,
        ),
        ("default safety verdicts all MARGINAL", safety_verdicts),
        (
            "step-event latency deltas and simultaneous-step property",
            latency_table,
        ),
        (
            "window features vs brute force; IEMG/MAV equivalence",
            feature_oracle,
        ),
        (
            "Bland-Altman offset, coverage and self-comparison",
            bland_altman_properties,
        ),
        ("stream analyzer equals emulator ledger", comms_equivalence),
        (
            "percentage-error matrix identity and extreme cell",
            frequency_response,
        ),
        ("stress, safety factor and elastic verdicts", mechanical),
        (
            "byte-identical report.json across pipeline runs",
            determinism,
        ),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}: {name} | {detail}", i + 1);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
