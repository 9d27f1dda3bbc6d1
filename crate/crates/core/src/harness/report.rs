//! Experiment reports and their JSON / CSV encodings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fit::SlopeFit;
use super::spec::{ExperimentKind, ExperimentSpec, ReportFormat};
use crate::anytime_tests::CalibrationReport;
use crate::error::{Error, Result};
use crate::threshold_learner::{StopReason, Trigger};

/// Round triggers of one run, counted by test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerCounts {
    pub var_u: u32,
    pub var_v: u32,
    pub label_u: u32,
    pub label_v: u32,
    pub budget: u32,
}

impl TriggerCounts {
    pub fn record(&mut self, t: Trigger) {
        match t {
            Trigger::VarU => self.var_u += 1,
            Trigger::VarV => self.var_v += 1,
            Trigger::LabelU => self.label_u += 1,
            Trigger::LabelV => self.label_v += 1,
            Trigger::Budget => self.budget += 1,
        }
    }

    pub fn abstention(&self) -> u32 {
        self.var_u + self.var_v
    }

    pub fn label(&self) -> u32 {
        self.label_u + self.label_v
    }

    pub fn add(&mut self, other: &TriggerCounts) {
        self.var_u += other.var_u;
        self.var_v += other.var_v;
        self.label_u += other.label_u;
        self.label_v += other.label_v;
        self.budget += other.budget;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub run_id: String,
    pub series: String,
    pub epsilon: f64,
    pub trial: u64,
    pub seed: u64,
    /// Ground-truth threshold; absent for boundary runs.
    pub theta_star: Option<f64>,
    /// `|θ̂ - θ*|` for threshold runs, the L¹ distance for boundary runs.
    pub error: f64,
    pub success: bool,
    pub queries: u64,
    pub stop_reason: StopReason,
    pub triggers: TriggerCounts,
    /// Trigger of the last round run; for boundary runs, of the last node.
    pub final_trigger: Option<Trigger>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSummary {
    pub series: String,
    pub epsilon: f64,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    /// 95% Wilson score interval.
    pub success_ci: (f64, f64),
    pub mean_queries: f64,
    pub median_queries: f64,
    pub stddev_queries: f64,
    pub budget_exhausted_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub series: String,
    pub fit: SlopeFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeComparison {
    pub monotone: SeriesFit,
    pub flat: SeriesFit,
    /// `flat.slope - monotone.slope`.
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub crate_version: String,
    pub root_seed: u64,
    /// Wall-clock stamp; the only field allowed to differ between reruns.
    pub generated_at_unix: Option<u64>,
    pub spec_echo: ExperimentSpec,
    pub per_epsilon: Vec<EpsilonSummary>,
    pub fitted_slope: Option<SeriesFit>,
    pub comparison: Option<SlopeComparison>,
    pub calibration: Option<CalibrationReport>,
    pub trials: Vec<TrialRecord>,
}

impl ExperimentReport {
    pub fn without_timestamp(&self) -> ExperimentReport {
        ExperimentReport {
            generated_at_unix: None,
            ..self.clone()
        }
    }

    pub fn summary(&self, series: &str, epsilon: f64) -> Option<&EpsilonSummary> {
        self.per_epsilon
            .iter()
            .find(|s| s.series == series && s.epsilon == epsilon)
    }
}

/// 95% Wilson score interval for `successes / trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Aggregates the records of one series at one ε.
pub fn summarize(series: &str, epsilon: f64, records: &[&TrialRecord]) -> EpsilonSummary {
    let trials = records.len() as u64;
    let successes = records.iter().filter(|r| r.success).count() as u64;
    let mut q: Vec<f64> = records.iter().map(|r| r.queries as f64).collect();
    q.sort_by(f64::total_cmp);
    let n = q.len() as f64;
    let mean = if q.is_empty() { 0.0 } else { q.iter().sum::<f64>() / n };
    let median = match q.len() {
        0 => 0.0,
        len if len % 2 == 1 => q[len / 2],
        len => 0.5 * (q[len / 2 - 1] + q[len / 2]),
    };
    let stddev = if q.len() < 2 {
        0.0
    } else {
        (q.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    EpsilonSummary {
        series: series.to_string(),
        epsilon,
        trials,
        successes,
        success_rate: if trials == 0 { 0.0 } else { successes as f64 / n },
        success_ci: wilson_interval(successes, trials),
        mean_queries: mean,
        median_queries: median,
        stddev_queries: stddev,
        budget_exhausted_count: records
            .iter()
            .filter(|r| r.stop_reason == StopReason::BudgetExhausted)
            .count() as u64,
    }
}

pub fn to_json_string(report: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Serialization(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn parse_json_report(text: &str) -> Result<ExperimentReport> {
    serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
}

/// One row per trial: `run_id,epsilon,seed,success,queries,stop_reason`.
pub fn to_csv_string(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(["run_id", "epsilon", "seed", "success", "queries", "stop_reason"])
        .map_err(ser)?;
    for t in &report.trials {
        let stop = match t.stop_reason {
            StopReason::Completed => "completed",
            StopReason::BudgetExhausted => "budget_exhausted",
        };
        w.write_record([
            t.run_id.clone(),
            t.epsilon.to_string(),
            t.seed.to_string(),
            t.success.to_string(),
            t.queries.to_string(),
            stop.to_string(),
        ])
        .map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn render(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_json_string(report),
        ReportFormat::Csv => to_csv_string(report),
    }
}

/// Writes the report to `path`, creating parent directories as needed.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render(report, format)?;
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, text).map_err(io)
}
