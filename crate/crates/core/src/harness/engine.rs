//! Runs experiments and assembles their reports.
//!
//! Trial `t` at ε index `i` draws everything from the stream
//! `derive_seed(root_seed, [i, t])`. Both series of an adaptivity comparison
//! use the same streams.

use std::time::{SystemTime, UNIX_EPOCH};

use super::fit::fit_loglog;
use super::report::{summarize, ExperimentReport, SeriesFit, SlopeComparison, TrialRecord, TriggerCounts};
use super::spec::{ExperimentKind, ExperimentSpec, LabelerSpec, SCHEMA_VERSION};
use crate::anytime_tests::calibrate_constants;
use crate::boundary_learner::{l1_distance, run_boundary_learner, DEFAULT_QUADRATURE_RESOLUTION};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::threshold_learner::{run_threshold_learner, StopReason};

fn trial_seed(spec: &ExperimentSpec, eps_index: usize, trial: u64) -> u64 {
    derive_seed(spec.root_seed, &[eps_index as u64, trial])
}

fn run_id(series: &str, eps_index: usize, trial: u64) -> String {
    format!("{series}-e{eps_index}-t{trial}")
}

/// Runs every trial of one threshold series.
fn threshold_series(spec: &ExperimentSpec, series: &str, labeler: &LabelerSpec) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::with_capacity(spec.epsilon_list.len() * spec.trials as usize);
    for (i, &epsilon) in spec.epsilon_list.iter().enumerate() {
        let cfg = spec.learner.at(epsilon)?;
        for trial in 0..spec.trials {
            let seed = trial_seed(spec, i, trial);
            let mut rng = stream_rng(seed);
            let (model, theta_star) = labeler.instantiate(&mut rng)?;
            let result = run_threshold_learner(&model, &cfg, &mut rng)?;
            let mut triggers = TriggerCounts::default();
            result.rounds.iter().for_each(|r| triggers.record(r.trigger));
            let error = (result.theta_hat - theta_star).abs();
            out.push(TrialRecord {
                run_id: run_id(series, i, trial),
                series: series.to_string(),
                epsilon,
                trial,
                seed,
                theta_star: Some(theta_star),
                error,
                success: result.completed() && error <= epsilon,
                queries: result.total_queries,
                stop_reason: result.stop_reason,
                triggers,
                final_trigger: result.rounds.last().map(|r| r.trigger),
            });
        }
    }
    Ok(out)
}

fn boundary_series(spec: &ExperimentSpec, series: &str) -> Result<Vec<TrialRecord>> {
    let bspec = spec
        .boundary
        .as_ref()
        .ok_or_else(|| Error::config("boundary experiment needs a boundary"))?;
    let truth = bspec.build()?;
    let labeler = spec.labeler.boundary_labeler(truth.clone())?;
    let mut out = Vec::new();
    for (i, &epsilon) in spec.epsilon_list.iter().enumerate() {
        let cfg = spec.learner.at(epsilon)?;
        for trial in 0..spec.trials {
            let seed = trial_seed(spec, i, trial);
            let result = run_boundary_learner(&labeler, &cfg, spec.gamma, seed)?;
            let error = l1_distance(
                |x| result.boundary.eval(x),
                |x| truth.eval(x),
                truth.dim,
                DEFAULT_QUADRATURE_RESOLUTION,
            )?;
            let mut triggers = TriggerCounts::default();
            for node in &result.per_node {
                node.result.rounds.iter().for_each(|r| triggers.record(r.trigger));
            }
            out.push(TrialRecord {
                run_id: run_id(series, i, trial),
                series: series.to_string(),
                epsilon,
                trial,
                seed,
                theta_star: None,
                error,
                success: result.stop_reason == StopReason::Completed && error <= epsilon,
                queries: result.total_queries,
                stop_reason: result.stop_reason,
                triggers,
                final_trigger: result
                    .per_node
                    .last()
                    .and_then(|n| n.result.rounds.last())
                    .map(|r| r.trigger),
            });
        }
    }
    Ok(out)
}

fn fit_series(spec: &ExperimentSpec, report: &ExperimentReport, series: &str) -> Result<SeriesFit> {
    let mut means = Vec::with_capacity(spec.epsilon_list.len());
    for &eps in &spec.epsilon_list {
        let s = report
            .summary(series, eps)
            .ok_or_else(|| Error::Fit(format!("no summary for {series} at epsilon {eps}")))?;
        if s.budget_exhausted_count == s.trials {
            return Err(Error::Fit(format!(
                "every {series} trial at epsilon {eps} exhausted its budget"
            )));
        }
        means.push(s.mean_queries);
    }
    Ok(SeriesFit {
        series: series.to_string(),
        fit: fit_loglog(&spec.epsilon_list, &means)?,
    })
}

fn empty_report(spec: &ExperimentSpec) -> ExperimentReport {
    ExperimentReport {
        schema_version: SCHEMA_VERSION,
        kind: spec.kind,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        root_seed: spec.root_seed,
        generated_at_unix: SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs()),
        spec_echo: spec.clone(),
        per_epsilon: Vec::new(),
        fitted_slope: None,
        comparison: None,
        calibration: None,
        trials: Vec::new(),
    }
}

fn attach_trials(spec: &ExperimentSpec, report: &mut ExperimentReport, series: &str, trials: Vec<TrialRecord>) {
    for &eps in &spec.epsilon_list {
        let rows: Vec<&TrialRecord> = trials.iter().filter(|t| t.epsilon == eps).collect();
        report.per_epsilon.push(summarize(series, eps, &rows));
    }
    report.trials.extend(trials);
}

pub const PRIMARY_SERIES: &str = "primary";
pub const MONOTONE_SERIES: &str = "monotone";
pub const FLAT_SERIES: &str = "flat";

/// Validates `spec` and runs the experiment it describes.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let mut report = empty_report(spec);
    match spec.kind {
        ExperimentKind::Consistency => {
            let trials = threshold_series(spec, PRIMARY_SERIES, &spec.labeler)?;
            attach_trials(spec, &mut report, PRIMARY_SERIES, trials);
        }
        ExperimentKind::Boundary => {
            let trials = boundary_series(spec, PRIMARY_SERIES)?;
            attach_trials(spec, &mut report, PRIMARY_SERIES, trials);
        }
        ExperimentKind::Scaling => {
            let trials = threshold_series(spec, PRIMARY_SERIES, &spec.labeler)?;
            attach_trials(spec, &mut report, PRIMARY_SERIES, trials);
            report.fitted_slope = Some(fit_series(spec, &report, PRIMARY_SERIES)?);
        }
        ExperimentKind::Adaptivity => {
            let flat_spec = spec.compare.as_ref().ok_or_else(|| Error::config("adaptivity needs a `compare` labeler"))?;
            let monotone = threshold_series(spec, MONOTONE_SERIES, &spec.labeler)?;
            attach_trials(spec, &mut report, MONOTONE_SERIES, monotone);
            let flat = threshold_series(spec, FLAT_SERIES, flat_spec)?;
            attach_trials(spec, &mut report, FLAT_SERIES, flat);
            let m = fit_series(spec, &report, MONOTONE_SERIES)?;
            let f = fit_series(spec, &report, FLAT_SERIES)?;
            report.fitted_slope = Some(m.clone());
            report.comparison = Some(SlopeComparison {
                difference: f.fit.slope - m.fit.slope,
                monotone: m,
                flat: f,
            });
        }
        ExperimentKind::Calibration => {
            let c = spec.calibration;
            report.calibration = Some(calibrate_constants(c.delta, c.n_max, c.trials, spec.root_seed)?);
        }
    }
    Ok(report)
}
