//! Prototype-versus-reference agreement: windowed features, agreement
//! metrics, multichannel latency and crosstalk.

mod compare;
mod crosstalk;
mod features;
mod latency;
mod metrics;

pub use compare::{
    align, compare_devices, resample_linear, AgreementReport, CompareOptions, FeatureAgreement,
};
pub use crosstalk::{assess_crosstalk, CrosstalkMatrix, CROSSTALK_RATIO_FLOOR};
pub use features::{
    extract_features, normalize, window_features, Feature, FeatureSeries, TrailingPolicy,
    VarConvention, WindowPlan,
};
pub use latency::{
    detect_latency, ChannelCrossing, LatencyEvent, LatencyOptions, LatencyTable, PairDelta,
};
pub use metrics::{bland_altman, mape, pearson, BlandAltman, BlandAltmanPoint, MAPE_EPSILON};

use serde::{Deserialize, Serialize};

use crate::model::VerdictLevel;

/// Agreement-category results as written to a section file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgreementSection {
    pub comparison: Option<AgreementReport>,
    pub latency: Option<LatencyTable>,
    pub crosstalk: Option<CrosstalkMatrix>,
    pub artifacts: Vec<String>,
}

impl AgreementSection {
    /// Only latency carries a verdict; comparison and crosstalk are informational.
    pub fn verdict(&self) -> Option<VerdictLevel> {
        self.latency.as_ref().map(|l| l.verdict)
    }

    pub fn is_empty(&self) -> bool {
        self.comparison.is_none() && self.latency.is_none() && self.crosstalk.is_none()
    }

    /// Fills absent parts from `other`.
    pub fn merge(mut self, other: AgreementSection) -> Self {
        self.comparison = self.comparison.or(other.comparison);
        self.latency = self.latency.or(other.latency);
        self.crosstalk = self.crosstalk.or(other.crosstalk);
        self.artifacts.extend(other.artifacts);
        self
    }
}
