//! Experiment engine: config files, trial loops, slope fits and reports.

mod config;
mod engine;
mod fit;
mod report;
mod spec;

pub use config::{parse_config, parse_config_file, ConfigMap};
pub use engine::{run_experiment, FLAT_SERIES, MONOTONE_SERIES, PRIMARY_SERIES};
pub use fit::{fit_loglog, SlopeFit};
pub use report::{
    emit_report, parse_json_report, render, summarize, to_csv_string, to_json_string, wilson_interval,
    EpsilonSummary, ExperimentReport, SeriesFit, SlopeComparison, TrialRecord, TriggerCounts,
};
pub use spec::{
    BoundarySpec, CalibrationSettings, ExperimentKind, ExperimentSpec, LabelerSpec, LearnerTemplate, ReportFormat,
    ThetaSpec, SCHEMA_VERSION,
};
