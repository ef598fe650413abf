//! Anomaly detection for IEC 60870-5-104 traffic.
//!
//! The pipeline: parse captured traffic into per-packet records
//! ([`ingest`]), turn each master/slave conversation into an
//! inter-arrival-time series ([`features`]), learn the timing profile
//! with the Local Outlier Factor algorithm ([`lof`]), and flag samples
//! that fall outside it ([`detector`]). The [`injector`] module
//! generates synthetic traffic and labeled attack effects so detection
//! quality can be measured against ground truth.

pub mod detector;
pub mod features;
pub mod ingest;
pub mod injector;
pub mod lof;

pub use detector::{
    DetectionMode, DetectionReport, SampleVerdict, ThresholdPolicy, ValidationReport, Verdict,
    WindowConfig,
};
pub use features::{FeatureSample, FeatureSeries, Label};
pub use ingest::{ApciType, Conversation, Endpoint, PacketRecord};
pub use injector::{AttackScenario, NormalPattern, ScenarioKind};
pub use lof::{LofModel, NeighborhoodTable, Point};
