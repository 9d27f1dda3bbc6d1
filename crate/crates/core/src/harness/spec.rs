use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anytime_tests::TestConfig;
use crate::boundary_learner::{BoundaryFunction, SmoothBoundary};
use crate::error::{Error, Result};
use crate::labelers::{AbstentionProfile, BoundaryLabeler, LabelerModel, LowerBoundLabeler, ThresholdLabeler};
use crate::threshold_learner::LearnerConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Consistency,
    Scaling,
    Adaptivity,
    Calibration,
    Boundary,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Adaptivity => "adaptivity",
            ExperimentKind::Calibration => "calibration",
            ExperimentKind::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::config(format!("unknown report format `{other}` (json|csv)"))),
        }
    }
}

/// Ground-truth threshold of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaSpec {
    Fixed { value: f64 },
    /// Drawn per trial from the trial's own stream.
    Uniform { lo: f64, hi: f64 },
}

impl ThetaSpec {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ThetaSpec::Fixed { value } => value,
            ThetaSpec::Uniform { lo, hi } => rng.gen_range(lo..=hi),
        }
    }
}

/// A labeler family with its parameters, as read from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LabelerSpec {
    /// `power`, `flat_band`, `constant` and `table`, distinguished by the
    /// profile.
    Threshold {
        theta_star: ThetaSpec,
        profile: AbstentionProfile,
        noise_c: f64,
        beta: f64,
    },
    LowerBound(LowerBoundLabeler),
}

impl LabelerSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            LabelerSpec::Threshold { profile, .. } => match profile {
                AbstentionProfile::Power { .. } => "power",
                AbstentionProfile::FlatBand { .. } => "flat_band",
                AbstentionProfile::Constant { .. } => "constant",
                AbstentionProfile::Table { .. } => "table",
            },
            LabelerSpec::LowerBound(_) => "lower_bound",
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            LabelerSpec::Threshold { beta, .. } => *beta,
            LabelerSpec::LowerBound(l) => l.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LabelerSpec::Threshold {
                theta_star,
                profile,
                noise_c,
                beta,
            } => {
                let probe = match *theta_star {
                    ThetaSpec::Fixed { value } => value,
                    ThetaSpec::Uniform { lo, hi } => {
                        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                            return Err(Error::config(format!("uniform theta* range [{lo}, {hi}] not inside [0, 1]")));
                        }
                        lo
                    }
                };
                ThresholdLabeler::new(probe, profile.clone(), *noise_c, *beta)?;
            }
            LabelerSpec::LowerBound(l) => {
                LowerBoundLabeler::new(l.k, l.epsilon, l.alpha, l.beta)?;
            }
        }
        Ok(())
    }

    /// Draws the trial's labeler; returns it with its ground-truth threshold.
    pub fn instantiate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(LabelerModel, f64)> {
        match self {
            LabelerSpec::Threshold {
                theta_star,
                profile,
                noise_c,
                beta,
            } => {
                let theta = theta_star.draw(rng);
                let l = ThresholdLabeler::new(theta, profile.clone(), *noise_c, *beta)?;
                Ok((LabelerModel::Threshold(l), theta))
            }
            LabelerSpec::LowerBound(l) => Ok((LabelerModel::LowerBound(*l), l.theta())),
        }
    }

    /// The same abstention/noise model around a boundary function.
    pub fn boundary_labeler(&self, boundary: SmoothBoundary) -> Result<BoundaryLabeler> {
        match self {
            LabelerSpec::Threshold {
                profile, noise_c, beta, ..
            } => BoundaryLabeler::new(boundary, profile.clone(), *noise_c, *beta),
            LabelerSpec::LowerBound(_) => Err(Error::config(
                "the lower_bound family is one-dimensional and cannot drive boundary experiments",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub dim: usize,
    pub func: BoundaryFunction,
    pub holder_k: f64,
    pub holder_gamma: f64,
}

impl BoundarySpec {
    pub fn build(&self) -> Result<SmoothBoundary> {
        SmoothBoundary::new(self.dim, self.func.clone(), self.holder_k, self.holder_gamma)
    }
}

impl Default for BoundarySpec {
    fn default() -> Self {
        let b = SmoothBoundary::reference_quadratic();
        BoundarySpec {
            dim: b.dim,
            func: b.func,
            holder_k: b.holder_k,
            holder_gamma: b.holder_gamma,
        }
    }
}

/// Learner settings shared by every ε of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerTemplate {
    pub delta: f64,
    pub test_cfg: TestConfig,
    pub max_queries: u64,
}

impl LearnerTemplate {
    pub fn at(&self, epsilon: f64) -> Result<LearnerConfig> {
        LearnerConfig::new(epsilon, self.delta, self.test_cfg, self.max_queries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub delta: f64,
    pub n_max: u64,
    pub trials: u64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            delta: 0.1,
            n_max: 10_000,
            trials: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub labeler: LabelerSpec,
    /// Second labeler of an adaptivity comparison (the flat one).
    pub compare: Option<LabelerSpec>,
    pub boundary: Option<BoundarySpec>,
    pub gamma: usize,
    pub learner: LearnerTemplate,
    pub epsilon_list: Vec<f64>,
    pub trials: u64,
    pub root_seed: u64,
    pub calibration: CalibrationSettings,
    pub output_path: Option<PathBuf>,
    pub format: ReportFormat,
}

impl ExperimentSpec {
    /// Defaults per experiment kind, used when no config file is given.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let learner = LearnerTemplate {
            delta: 0.1,
            test_cfg: TestConfig::default(),
            max_queries: 10_000_000,
        };
        let noiseless = LabelerSpec::Threshold {
            theta_star: ThetaSpec::Fixed { value: 0.3 },
            profile: AbstentionProfile::Constant { level: 0.0 },
            noise_c: 1.0,
            beta: 0.0,
        };
        let informative = LabelerSpec::Threshold {
            theta_star: ThetaSpec::Uniform { lo: 0.1, hi: 0.9 },
            profile: AbstentionProfile::Power { c_prime: 1.0, alpha: 1.0 },
            noise_c: 0.0,
            beta: 1.0,
        };
        let flat = LabelerSpec::Threshold {
            theta_star: ThetaSpec::Uniform { lo: 0.1, hi: 0.9 },
            profile: AbstentionProfile::Constant { level: 0.5 },
            noise_c: 1.0,
            beta: 1.0,
        };
        let scaling_eps = vec![0.04, 0.02, 0.01, 0.005];
        let base = ExperimentSpec {
            kind,
            labeler: noiseless,
            compare: None,
            boundary: None,
            gamma: 2,
            learner,
            epsilon_list: vec![0.01],
            trials: 200,
            root_seed: 1,
            calibration: CalibrationSettings::default(),
            output_path: None,
            format: ReportFormat::Json,
        };
        match kind {
            ExperimentKind::Consistency | ExperimentKind::Calibration => base,
            ExperimentKind::Scaling => ExperimentSpec {
                labeler: informative,
                epsilon_list: scaling_eps,
                trials: 50,
                learner: LearnerTemplate {
                    max_queries: 100_000_000,
                    ..learner
                },
                ..base
            },
            ExperimentKind::Adaptivity => ExperimentSpec {
                labeler: informative,
                compare: Some(flat),
                epsilon_list: scaling_eps,
                trials: 50,
                learner: LearnerTemplate {
                    max_queries: 100_000_000,
                    ..learner
                },
                ..base
            },
            ExperimentKind::Boundary => ExperimentSpec {
                boundary: Some(BoundarySpec::default()),
                epsilon_list: vec![0.05],
                trials: 50,
                learner: LearnerTemplate { delta: 0.2, ..learner },
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::config("trials must be >= 1"));
        }
        if self.kind != ExperimentKind::Calibration {
            if self.epsilon_list.is_empty() {
                return Err(Error::config("epsilon list must not be empty"));
            }
            for &eps in &self.epsilon_list {
                self.learner.at(eps).map_err(|e| Error::config(e.to_string()))?;
            }
            self.labeler.validate()?;
        }
        if matches!(self.kind, ExperimentKind::Scaling | ExperimentKind::Adaptivity) {
            if self.epsilon_list.len() < 3 {
                return Err(Error::config("scaling experiments need at least 3 epsilon values"));
            }
            if self.epsilon_list.windows(2).any(|w| !(w[0] > w[1])) {
                return Err(Error::config("epsilon list must be strictly decreasing"));
            }
        }
        if self.kind == ExperimentKind::Adaptivity {
            let other = self
                .compare
                .as_ref()
                .ok_or_else(|| Error::config("adaptivity needs a `compare` labeler"))?;
            other.validate()?;
            if other.beta() != self.labeler.beta() {
                return Err(Error::config(format!(
                    "adaptivity labelers must share beta ({} vs {})",
                    self.labeler.beta(),
                    other.beta()
                )));
            }
        }
        if self.kind == ExperimentKind::Boundary {
            let b = self.boundary.as_ref().ok_or_else(|| Error::config("boundary experiment needs a boundary"))?;
            if self.gamma == 0 {
                return Err(Error::config("gamma must be a positive integer"));
            }
            self.labeler.boundary_labeler(b.build()?)?;
        }
        if self.kind == ExperimentKind::Calibration && self.calibration.trials < 100 {
            return Err(Error::config("calibration needs at least 100 trials"));
        }
        Ok(())
    }
}
