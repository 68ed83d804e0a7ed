//! Seeded synthetic fixtures: sEMG-like bursts, step stimuli, baselines,
//! sweeps, force–displacement logs and frame streams.
//!
//! All generators draw from ChaCha8 seeded with a `u64`, so a seed gives the
//! same output on every platform.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::agreement::resample_linear;
use crate::comms::{emulate, BurstDrop, EmulatorConfig, FaultPlan, SignalSource};
use crate::error::{Error, Result};
use crate::ingest::{
    write_force_displacement, write_frequency_sweep, write_recording, ForceDisplacementLog,
    ForceDisplacementPoint, FrequencySweep, SweepEntry,
};
use crate::model::{ChannelSeries, Recording, Units};

/// Bench leakage currents (µA), one row per sensor, four repetitions.
pub const LEAKAGE_CSV: &str = "sensor,rep1,rep2,rep3,rep4
1,15.36,15.36,16.98,20.62
2,15.77,15.77,19.98,20.39
3,15.77,15.77,16.98,18.76
4,15.04,15.04,26.68,17.95
5,16.01,16.01,24.66,17.95
6,17.71,17.71,20.62,17.95
7,17.63,21.83,20.38,20.62
8,21.83,17.63,24.42,17.95
";

/// Bench patient auxiliary currents (µA), ten repetitions.
pub const AUXILIARY_CSV: &str = "repetition,current_ua
1,135.12
2,135.12
3,170.70
4,152.18
5,73.32
6,63.47
7,59.76
8,59.66
9,93.30
10,67.69
";

/// Step onsets (ms) on channels 2, 4 and 8 for eleven stimulus events.
pub const STEP_EVENTS_MS: [[f64; 3]; 11] = [
    [5318.0, 5318.0, 5318.0],
    [10291.0, 10291.0, 10291.0],
    [15809.0, 15809.0, 15809.0],
    [20700.0, 20691.0, 20691.0],
    [25500.0, 25491.0, 25491.0],
    [31164.0, 31164.0, 31164.0],
    [36609.0, 36609.0, 36609.0],
    [44818.0, 44818.0, 44818.0],
    [52809.0, 52800.0, 52800.0],
    [54164.0, 54164.0, 54164.0],
    [55864.0, 55864.0, 55864.0],
];
pub const STEP_EVENT_CHANNELS: [u8; 3] = [2, 4, 8];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(sd: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sd).map_err(|e| Error::invalid(format!("noise sd {sd}: {e}")))
}

/// A contraction: Gaussian carrier under a raised-cosine envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burst {
    pub start_s: f64,
    pub duration_s: f64,
    pub amplitude: f64,
}

/// sEMG-like signal: bursts over a Gaussian noise floor.
pub fn emg_bursts(
    n: usize,
    rate_hz: f64,
    bursts: &[Burst],
    noise_sd: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut r = rng(seed);
    let unit = normal(1.0)?;
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / rate_hz;
            let env: f64 = bursts
                .iter()
                .filter(|b| t >= b.start_s && t < b.start_s + b.duration_s)
                .map(|b| {
                    let phase = (t - b.start_s) / b.duration_s;
                    b.amplitude * 0.5 * (1.0 - (std::f64::consts::TAU * phase).cos())
                })
                .sum();
            let carrier = unit.sample(&mut r);
            let floor = unit.sample(&mut r);
            env * carrier + noise_sd * floor
        })
        .collect())
}

/// Adds white Gaussian noise at the given signal-to-noise ratio.
pub fn add_noise_snr(signal: &[f64], snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Ok(Vec::new());
    }
    let power = signal.iter().map(|x| x * x).sum::<f64>() / signal.len() as f64;
    let sd = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    if sd == 0.0 {
        return Ok(signal.to_vec());
    }
    let d = normal(sd)?;
    let mut r = rng(seed);
    Ok(signal.iter().map(|x| x + d.sample(&mut r)).collect())
}

/// Square pulses starting at each onset. Channel `k` of the list is sampled
/// `k · skew_s` later than channel 0, as a sequential converter would.
pub fn step_recording(
    onsets_ms: &[(u8, Vec<f64>)],
    rate_hz: f64,
    duration_s: f64,
    pulse_ms: f64,
    skew_s: f64,
) -> Result<Recording> {
    let n = (duration_s * rate_hz).round() as usize;
    let channels = onsets_ms
        .iter()
        .enumerate()
        .map(|(k, (id, onsets))| {
            let offset_ms = k as f64 * skew_s * 1000.0;
            let samples = (0..n)
                .map(|i| {
                    let t = i as f64 * 1000.0 / rate_hz + offset_ms;
                    if onsets.iter().any(|&o| t >= o && t < o + pulse_ms) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            ChannelSeries::new(*id, samples)
        })
        .collect();
    Recording::new(channels, rate_hz, Units::MilliVolt)
}

/// Step stimuli on channels 2, 4 and 8 at [`STEP_EVENTS_MS`], sampled at 1 kHz.
pub fn step_event_recording() -> Result<Recording> {
    let onsets: Vec<(u8, Vec<f64>)> = STEP_EVENT_CHANNELS
        .iter()
        .enumerate()
        .map(|(c, &id)| (id, STEP_EVENTS_MS.iter().map(|e| e[c]).collect()))
        .collect();
    step_recording(&onsets, 1000.0, 58.0, 200.0, 0.0)
}

/// No-load output around `level` with white noise, one series per repetition.
pub fn baseline_repetitions(
    repetitions: usize,
    n: usize,
    level: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let d = normal(noise_sd)?;
    let mut r = rng(seed);
    Ok((0..repetitions)
        .map(|_| (0..n).map(|_| level + d.sample(&mut r)).collect())
        .collect())
}

pub const SWEEP_FREQUENCIES_HZ: [f64; 6] = [10.0, 20.0, 50.0, 100.0, 200.0, 500.0];

/// Stages 1–8 at [`SWEEP_FREQUENCIES_HZ`]; measured gain deviates from the
/// simulated one by a relative Gaussian error.
pub fn frequency_sweep(relative_error_sd: f64, seed: u64) -> Result<FrequencySweep> {
    let mut r = rng(seed);
    let mut entries = Vec::new();
    for stage in 1..=8u8 {
        for &f in &SWEEP_FREQUENCIES_HZ {
            let simulated = 1.0 + stage as f64 * (1.0 + (f / 100.0).ln().abs());
            let err = if relative_error_sd > 0.0 {
                normal(relative_error_sd)?.sample(&mut r)
            } else {
                0.0
            };
            entries.push(SweepEntry {
                stage,
                frequency_hz: f,
                simulated_gain: simulated,
                measured_gain: simulated * (1.0 + err),
            });
        }
    }
    FrequencySweep::new(entries)
}

/// Ideal linear-elastic compression: σ = E·ε up to `max_force_n`.
pub fn linear_force_displacement(
    max_force_n: f64,
    modulus_mpa: f64,
    area_mm2: f64,
    height_mm: f64,
    points: usize,
) -> Result<ForceDisplacementLog> {
    knee_force_displacement(
        max_force_n,
        modulus_mpa,
        area_mm2,
        height_mm,
        points,
        1.0,
        1.0,
    )
}

/// Linear up to `knee_fraction` of the peak load; beyond it the material is
/// `softening` times more compliant.
pub fn knee_force_displacement(
    max_force_n: f64,
    modulus_mpa: f64,
    area_mm2: f64,
    height_mm: f64,
    points: usize,
    knee_fraction: f64,
    softening: f64,
) -> Result<ForceDisplacementLog> {
    if points < 2 {
        return Err(Error::invalid("need at least 2 points"));
    }
    let compliance = height_mm / (area_mm2 * modulus_mpa);
    let knee = knee_fraction * max_force_n;
    let pts = (0..points)
        .map(|i| {
            let f = max_force_n * i as f64 / (points - 1) as f64;
            let d = if f <= knee {
                f * compliance
            } else {
                knee * compliance + (f - knee) * compliance * softening
            };
            ForceDisplacementPoint {
                force_n: f,
                displacement_mm: d,
            }
        })
        .collect();
    ForceDisplacementLog::new(pts, area_mm2, height_mm)
}

/// One recording per stimulated channel: the stimulus on that channel and an
/// attenuated copy plus noise on the others.
pub fn crosstalk_recordings(
    channels: &[u8],
    rate_hz: f64,
    n: usize,
    coupling_db: f64,
    seed: u64,
) -> Result<Vec<(u8, Recording)>> {
    let gain = 10f64.powf(coupling_db / 20.0);
    let mut out = Vec::new();
    for (k, &stim) in channels.iter().enumerate() {
        let seed_k = seed.wrapping_add(k as u64);
        let source: Vec<f64> = (0..n)
            .map(|i| (std::f64::consts::TAU * 50.0 * i as f64 / rate_hz).sin())
            .collect();
        let d = normal(gain * 0.01)?;
        let mut r = rng(seed_k);
        let series = channels
            .iter()
            .map(|&id| {
                let s = if id == stim {
                    source.clone()
                } else {
                    source.iter().map(|x| gain * x + d.sample(&mut r)).collect()
                };
                ChannelSeries::new(id, s)
            })
            .collect();
        out.push((stim, Recording::new(series, rate_hz, Units::MilliVolt)?));
    }
    Ok(out)
}

/// Reference recording and a prototype capture of the same activity: lower
/// rate, delayed, attenuated and noisier.
pub fn device_pair(seed: u64) -> Result<(Recording, Recording)> {
    let ref_rate = 1000.0;
    let bursts: Vec<Burst> = (0..6)
        .map(|i| Burst {
            start_s: 1.0 + 3.0 * i as f64,
            duration_s: 1.5,
            amplitude: 1.0,
        })
        .collect();
    let reference = emg_bursts(20_000, ref_rate, &bursts, 0.02, seed)?;
    let proto_rate = 800.0;
    let lag = 40;
    let mut proto: Vec<f64> = vec![0.0; lag];
    proto.extend(
        resample_linear(&reference, ref_rate, proto_rate)
            .iter()
            .map(|x| 0.8 * x),
    );
    let proto = add_noise_snr(&proto, 20.0, seed.wrapping_add(1))?;
    Ok((
        Recording::single(proto, proto_rate, Units::MilliVolt)?,
        Recording::single(reference, ref_rate, Units::MilliVolt)?,
    ))
}

/// Fault plan used for the faulty stream fixture.
pub fn fixture_fault_plan(seed: u64) -> FaultPlan {
    FaultPlan {
        drop_probability: 0.01,
        corrupt_probability: 0.005,
        jitter_ms: 2,
        burst_drop: Some(BurstDrop {
            start_frame: 20_000,
            length: 40,
        }),
        seed,
    }
}

/// Writes the complete fixture set into `dir` and returns the written paths,
/// sorted.
pub fn write_fixture_set(dir: impl AsRef<Path>, seed: u64) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("crosstalk"))?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, bytes)?;
        written.push(p);
        Ok(())
    };

    put("leakage.csv", LEAKAGE_CSV.as_bytes())?;
    put("auxiliary.csv", AUXILIARY_CSV.as_bytes())?;

    let reps = baseline_repetitions(3, 2000, 1.0, 0.02, seed)?;
    for (i, r) in reps.into_iter().enumerate() {
        let rec = Recording::single(r, 800.0, Units::Volt)?;
        put(
            &format!("baseline_rep{}.csv", i + 1),
            write_recording(&rec).as_bytes(),
        )?;
    }

    put(
        "sweep.csv",
        write_frequency_sweep(&frequency_sweep(0.05, seed)?).as_bytes(),
    )?;

    let (proto, reference) = device_pair(seed)?;
    put("prototype.csv", write_recording(&proto).as_bytes())?;
    put("reference.csv", write_recording(&reference).as_bytes())?;

    put(
        "latency.csv",
        write_recording(&step_event_recording()?).as_bytes(),
    )?;

    for (stim, rec) in crosstalk_recordings(&[1, 2, 3, 4], 800.0, 4000, -50.0, seed)? {
        put(
            &format!("crosstalk/stim_ch{stim}.csv"),
            write_recording(&rec).as_bytes(),
        )?;
    }

    let cfg = EmulatorConfig::default();
    let clean = emulate(48_000, &SignalSource::Ramp, &FaultPlan::clean(seed), &cfg)?;
    put("clean.bin", &clean.bytes)?;
    let faulty = emulate(48_000, &SignalSource::Ramp, &fixture_fault_plan(seed), &cfg)?;
    put("faulty.bin", &faulty.bytes)?;
    put(
        "faulty_ledger.json",
        (serde_json::to_string_pretty(&faulty.ledger)? + "\n").as_bytes(),
    )?;

    let linear = linear_force_displacement(98.0, 1500.0, 653.33, 20.0, 25)?;
    put(
        "fd_linear.csv",
        write_force_displacement(&linear).as_bytes(),
    )?;
    let knee = knee_force_displacement(98.0, 1500.0, 653.33, 20.0, 25, 0.6, 20.0)?;
    put("fd_knee.csv", write_force_displacement(&knee).as_bytes())?;

    written.sort();
    Ok(written)
}

/// Uniform onset times for randomized step trials.
pub fn random_onsets_ms(count: usize, duration_ms: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let spacing = duration_ms / (count + 1) as f64;
    (0..count)
        .map(|i| spacing * (i as f64 + 0.5) + r.random_range(0.0..spacing * 0.5))
        .collect()
}
