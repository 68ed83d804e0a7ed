//! `--config` file handling.
//!
//! Two shapes are accepted: a full CLI config object, or a bare thresholds
//! object. Missing fields keep their defaults; command-line flags win over
//! both.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use emgvalid_core::ComplianceThresholds;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub thresholds: ComplianceThresholds,
    pub window_ms: Option<f64>,
    pub overlap: Option<f64>,
    pub pairs: Option<Vec<(u8, u8)>>,
    /// Default output directory for every subcommand.
    pub out: Option<PathBuf>,
    pub verbose: bool,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg = match serde_json::from_str::<CliConfig>(&text) {
            Ok(c) => c,
            Err(full_err) => match serde_json::from_str::<ComplianceThresholds>(&text) {
                Ok(thresholds) => CliConfig {
                    thresholds,
                    ..Self::default()
                },
                Err(_) => {
                    return Err(full_err)
                        .with_context(|| format!("parsing config {}", path.display()))
                }
            },
        };
        cfg.thresholds
            .validate()
            .with_context(|| format!("config {}", path.display()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(s: &str) -> Result<CliConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, s).unwrap();
        CliConfig::load(Some(&p))
    }

    #[test]
    fn defaults_without_file() {
        let c = CliConfig::load(None).unwrap();
        assert_eq!(c.thresholds, ComplianceThresholds::default());
        assert!(c.pairs.is_none());
    }

    #[test]
    fn bare_thresholds_merge_over_defaults() {
        let c = load_str(r#"{"marginal_multiplier": 2.1}"#).unwrap();
        assert_eq!(c.thresholds.marginal_multiplier, 2.1);
        assert_eq!(c.thresholds.leakage_limit_ua, 10.0);
    }

    #[test]
    fn full_config() {
        let c = load_str(
            r#"{"thresholds": {"leakage_limit_ua": 12}, "pairs": [[2, 4]], "window_ms": 100}"#,
        )
        .unwrap();
        assert_eq!(c.thresholds.leakage_limit_ua, 12.0);
        assert_eq!(c.pairs, Some(vec![(2, 4)]));
        assert_eq!(c.window_ms, Some(100.0));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(load_str(r#"{"nonsense": 1}"#).is_err());
        assert!(load_str(r#"{"marginal_multiplier": 0.5}"#).is_err());
    }
}
