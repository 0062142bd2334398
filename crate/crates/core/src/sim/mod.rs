//! Simulated marketplace and the experiment harness.
//!
//! An [`Environment`] holds a synthetic catalog whose joint click model is
//! the ground truth. Impressions, treatment assignment and clicks draw from
//! streams keyed by seed and impression id, so every result is independent
//! of thread count.

mod config;
mod diversity;
mod env;
mod report;
mod suite;
mod treatment;

pub use config::{
    Assignment, BaseCtrDistribution, BidDistribution, ShiftConfig, SimConfig, TunerConfig,
    TunerKind, SCHEMA_VERSION,
};
pub use diversity::{diversity_metrics, tuple_diversity, DiversitySummary, SlotGroup, TupleDiversity};
pub use env::{generate_epoch, stream, Catalog, CatalogAd, CatalogItem, Environment, EVAL_TAG, TUNE_TAG};
pub use report::{
    outcomes, CategoryRow, DistanceRow, DiversityRow, ExpectedMetrics, ExperimentReport,
    MetricStat, RealizedMetrics, ShiftRow, TreatmentRow, TuningSummary,
};
pub use suite::{run_experiment_suite, run_treatment, tune_on_epoch, tune_on_log, Scenario, SuiteInputs};
pub use treatment::{realize_clicks, run_arms, ArmContext, ArmResult, ImpressionOutcome, Treatment};
