//! Validation analyses for low-cost surface EMG acquisition devices.
//!
//! The crate is organised by test category:
//!
//! - [`safety`]: leakage and patient auxiliary current against regulatory limits
//! - [`operation`]: baseline stability and stage-by-frequency gain error
//! - [`agreement`]: windowed features, device-vs-reference agreement, latency, crosstalk
//! - [`comms`]: wire frame codec, stream integrity analysis and a fault-injecting emulator
//! - [`mech`]: stress–strain curve and elastic behaviour of the enclosure
//! - [`report`]: consolidated, deterministic validation report
//!
//! [`model`] holds the shared domain types and statistics kernel, [`ingest`] the
//! CSV loaders and [`synth`] the seeded fixture generators.

pub mod agreement;
pub mod comms;
pub mod error;
pub mod ingest;
pub mod mech;
pub mod model;
pub mod operation;
pub mod report;
pub mod safety;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    descriptive_stats, verdict, ChannelSeries, ComplianceThresholds, DescriptiveStats, Recording,
    Units, Verdict, VerdictLevel,
};

/// Toolkit version embedded in reports.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
