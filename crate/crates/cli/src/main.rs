//! `emgvalid`: run the sEMG device validation analyses from the command line.
//!
//! Exit codes: 0 PASS (or no verdict), 1 usage or I/O error, 2 FAIL,
//! 3 MARGINAL.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emgvalid_core::report::SCHEMA_VERSION;
use emgvalid_core::{VerdictLevel, TOOLKIT_VERSION};

use crate::config::CliConfig;

#[derive(Debug, Parser)]
#[command(
    name = "emgvalid",
    about = "Validation toolkit for low-cost sEMG acquisition devices"
)]
#[command(disable_version_flag = true)]
pub struct Cli {
    /// JSON config (thresholds, window plan, channel pairs, output directory).
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,

    /// Print section JSON to stdout even when writing files.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    /// Print toolkit and report schema versions.
    #[arg(short = 'V', long)]
    pub version: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Leakage and patient auxiliary current against the configured limits.
    Safety(SafetyArgs),
    /// Baseline stability of no-load recordings.
    Stability(StabilityArgs),
    /// Stage × frequency percentage-error matrix.
    Freqresp(FreqrespArgs),
    /// Prototype-versus-reference feature agreement.
    Compare(CompareArgs),
    /// Threshold-crossing latency between channels.
    Latency(LatencyArgs),
    /// Crosstalk matrix from one recording per stimulated channel.
    Crosstalk(CrosstalkArgs),
    /// Frame stream analysis and emulation.
    #[command(subcommand)]
    Comms(CommsCommand),
    /// Stress–strain curve and elastic assessment.
    Mech(MechArgs),
    /// Consolidate section files into report.json and report.md.
    Report(ReportArgs),
    /// Write the synthetic fixture set.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SafetyArgs {
    /// Sensor × repetition table.
    #[arg(long, value_name = "CSV")]
    pub leakage: Option<PathBuf>,
    /// Repetition series of auxiliary current.
    #[arg(long, value_name = "CSV")]
    pub auxiliary: Option<PathBuf>,
    /// Tables hold mV drops across the body resistance instead of µA.
    #[arg(long)]
    pub millivolts: bool,
    /// Judge each sensor by its largest repetition instead of its mean.
    #[arg(long)]
    pub worst_case: bool,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    /// Recordings; every channel column of every file is one repetition.
    #[arg(required = true, value_name = "CSV")]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 800.0)]
    pub rate: f64,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FreqrespArgs {
    /// Rows of stage, frequency_hz, simulated_gain, measured_gain.
    pub sweep: PathBuf,
    /// Gains are in dB.
    #[arg(long)]
    pub db: bool,
    /// Directory, or a `.csv` path for the wide matrix.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_name = "CSV")]
    pub prototype: PathBuf,
    #[arg(long, value_name = "CSV")]
    pub reference: PathBuf,
    #[arg(long, value_name = "HZ")]
    pub prototype_rate: f64,
    #[arg(long, value_name = "HZ")]
    pub reference_rate: f64,
    #[arg(long)]
    pub prototype_channel: Option<u8>,
    #[arg(long)]
    pub reference_channel: Option<u8>,
    #[arg(long)]
    pub window_ms: Option<f64>,
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Keep a trailing partial window.
    #[arg(long)]
    pub keep_trailing: bool,
    /// VAR as Σx²/(N−1) instead of about the window mean.
    #[arg(long)]
    pub zero_mean_var: bool,
    /// Remove each signal's mean first.
    #[arg(long)]
    pub detrend: bool,
    #[arg(long, default_value_t = 2.0)]
    pub max_lag_s: f64,
    #[arg(long, default_value_t = 0.2)]
    pub min_alignment_r: f64,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LatencyArgs {
    pub recording: PathBuf,
    #[arg(long, value_name = "HZ")]
    pub rate: f64,
    /// Channel pairs, e.g. `2:4,4:8`. Default: consecutive channels.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    pub pairs: Vec<(u8, u8)>,
    /// Fraction of each channel's peak-to-peak range.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 500.0)]
    pub refractory_ms: f64,
    /// Largest acceptable delta; default one sampling interval.
    #[arg(long)]
    pub tolerance_ms: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrosstalkArgs {
    /// Directory of CSVs; the last number in each file name is the stimulated channel.
    pub dir: PathBuf,
    #[arg(long, value_name = "HZ")]
    pub rate: f64,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CommsCommand {
    /// Integrity of a raw frame dump.
    Analyze(AnalyzeArgs),
    /// Generate a frame dump with injected faults and its ledger.
    Emulate(EmulateArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub dump: PathBuf,
    #[arg(long, value_name = "HZ")]
    pub rate: f64,
    #[arg(long, value_name = "S")]
    pub duration: f64,
    /// Allowed |received − expected| frames.
    #[arg(long, default_value_t = 1)]
    pub tolerance_frames: u64,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmulateArgs {
    #[arg(long)]
    pub frames: u64,
    #[arg(long, default_value_t = 800.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub drop: f64,
    #[arg(long, default_value_t = 0.0)]
    pub corrupt: f64,
    #[arg(long, default_value_t = 0)]
    pub jitter_ms: u32,
    /// Burst drop as `START:LENGTH` frames.
    #[arg(long, value_parser = parse_burst)]
    pub burst: Option<(u64, u64)>,
    #[arg(long, default_value_t = 0)]
    pub start_seq: u16,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dump file.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Fault ledger JSON.
    #[arg(long, value_name = "FILE")]
    pub ledger: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MechArgs {
    /// Rows of force_n, displacement_mm.
    pub log: PathBuf,
    #[arg(long)]
    pub area_mm2: f64,
    #[arg(long)]
    pub height_mm: f64,
    /// Fit through the origin instead of with a free intercept.
    #[arg(long)]
    pub anchor_origin: bool,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_name = "JSON")]
    pub safety: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    pub stability: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    pub freqresp: Option<PathBuf>,
    /// May be repeated (compare, latency, crosstalk).
    #[arg(long, value_name = "JSON")]
    pub agreement: Vec<PathBuf>,
    #[arg(long, value_name = "JSON")]
    pub comms: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    pub mech: Option<PathBuf>,
    #[arg(long, default_value = "")]
    pub device: String,
    #[arg(long)]
    pub date: Option<String>,
    #[arg(long)]
    pub operator: Option<String>,
    #[arg(long)]
    pub insulation_enclosed: Option<bool>,
    #[arg(long)]
    pub electrodes_housed: Option<bool>,
    #[arg(long)]
    pub comfort_notes: Option<String>,
    #[arg(long)]
    pub skin_marks: Option<bool>,
    #[arg(long)]
    pub readjustment: Option<bool>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(u8, u8), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected A:B, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<u8>().map_err(|e| format!("{x:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_burst(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected START:LENGTH, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("{x:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

pub fn exit_code(level: Option<VerdictLevel>) -> u8 {
    match level {
        None | Some(VerdictLevel::Pass) => 0,
        Some(VerdictLevel::Fail) => 2,
        Some(VerdictLevel::Marginal) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if cli.version {
        println!("emgvalid {TOOLKIT_VERSION} (report schema {SCHEMA_VERSION})");
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required\n\nRun `emgvalid --help` for usage.");
        return ExitCode::from(1);
    };
    let result = CliConfig::load(cli.config.as_deref())
        .and_then(|cfg| commands::run(command, &cfg, cli.verbose || cfg.verbose));
    match result {
        Ok(level) => ExitCode::from(exit_code(level)),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
