use std::path::PathBuf;
use std::process::ExitCode;

use abstain_core::harness::{
    emit_report, parse_config, parse_config_file, render, run_experiment, ConfigMap, ExperimentKind,
    ExperimentReport,
};
use abstain_core::Error;
use clap::{Args, Parser, Subcommand};

const EXIT_CONFIG: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_ASSERT: u8 = 3;

#[derive(Parser)]
#[command(name = "abstain", version, about = "Active learning with abstaining labelers: experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo calibration of the sequential test constants.
    Calibrate(Common),
    /// Success rate of the threshold learner at fixed ε.
    Consistency(Common),
    /// Query-count scaling in 1/ε with a log-log slope fit.
    Scaling(Common),
    /// Slope comparison between an informative and a flat abstention profile.
    Adaptivity(Common),
    /// Learning a smooth boundary on the unit cube.
    Boundary(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json or csv.
    #[arg(long)]
    format: Option<String>,
    /// Trials per ε; overrides `trials`.
    #[arg(long)]
    trials: Option<u64>,
    /// Per-run query budget; overrides `max_queries`.
    #[arg(long)]
    max_queries: Option<u64>,
    /// Fail with exit code 3 unless the fitted slope lies in `lo:hi`.
    #[arg(long, value_name = "LO:HI")]
    assert_slope: Option<String>,
    /// Fail with exit code 3 if any ε has a lower success rate.
    #[arg(long, value_name = "RATE")]
    assert_success_rate: Option<f64>,
}

enum Failure {
    Error(Error),
    Assertion(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn parse_slope_range(s: &str) -> Result<(f64, f64), Error> {
    let bad = || Error::Config(format!("--assert-slope expects LO:HI, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn print_summary(report: &ExperimentReport) {
    for s in &report.per_epsilon {
        eprintln!(
            "{:>9} eps={:<8} success={}/{} ({:.3}) mean_queries={:.1} budget_exhausted={}",
            s.series, s.epsilon, s.successes, s.trials, s.success_rate, s.mean_queries, s.budget_exhausted_count
        );
    }
    if let Some(f) = &report.fitted_slope {
        eprintln!("slope[{}] = {:.4}", f.series, f.fit.slope);
    }
    if let Some(c) = &report.comparison {
        eprintln!(
            "slope[{}] = {:.4}, difference = {:.4}",
            c.flat.series, c.flat.fit.slope, c.difference
        );
    }
    if let Some(c) = &report.calibration {
        eprintln!(
            "d0 = {} (fp {:.4}), d1 = {} (fp {:.4})",
            c.calibrated_d0, c.observed_fp_rate_d0, c.calibrated_d1, c.observed_fp_rate_d1
        );
    }
}

fn check_assertions(args: &Common, report: &ExperimentReport) -> Result<(), Failure> {
    if let Some(range) = &args.assert_slope {
        let (lo, hi) = parse_slope_range(range)?;
        let fit = report
            .fitted_slope
            .as_ref()
            .ok_or_else(|| Failure::Assertion("report has no fitted slope".into()))?;
        if !(lo..=hi).contains(&fit.fit.slope) {
            return Err(Failure::Assertion(format!(
                "slope {:.4} outside [{lo}, {hi}]",
                fit.fit.slope
            )));
        }
    }
    if let Some(min) = args.assert_success_rate {
        if let Some(s) = report.per_epsilon.iter().find(|s| s.success_rate < min) {
            return Err(Failure::Assertion(format!(
                "{} success rate {:.4} at eps {} below {min}",
                s.series, s.success_rate, s.epsilon
            )));
        }
    }
    Ok(())
}

fn run(kind: ExperimentKind, args: &Common) -> Result<(), Failure> {
    let mut map: ConfigMap = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => parse_config("")?,
    };
    if let Some(seed) = args.seed {
        map.set("seed", seed.to_string());
    }
    if let Some(trials) = args.trials {
        map.set("trials", trials.to_string());
    }
    if let Some(q) = args.max_queries {
        map.set("max_queries", q.to_string());
    }
    if let Some(f) = &args.format {
        map.set("format", f.clone());
    }
    if let Some(range) = &args.assert_slope {
        parse_slope_range(range)?;
    }
    let spec = map.to_spec(kind)?;
    let report = run_experiment(&spec)?;
    let out = args.out.clone().or_else(|| spec.output_path.clone());
    match out {
        Some(path) => emit_report(&report, spec.format, &path)?,
        None => print!("{}", render(&report, spec.format)?),
    }
    print_summary(&report);
    check_assertions(args, &report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Calibrate(a) => (ExperimentKind::Calibration, a),
        Command::Consistency(a) => (ExperimentKind::Consistency, a),
        Command::Scaling(a) => (ExperimentKind::Scaling, a),
        Command::Adaptivity(a) => (ExperimentKind::Adaptivity, a),
        Command::Boundary(a) => (ExperimentKind::Boundary, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(EXIT_ASSERT)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(EXIT_IO),
                _ => ExitCode::from(EXIT_CONFIG),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_ranges() {
        assert_eq!(parse_slope_range("0.6:1.7").unwrap(), (0.6, 1.7));
        assert!(parse_slope_range("1.7:0.6").is_err());
        assert!(parse_slope_range("1.7").is_err());
    }
}
