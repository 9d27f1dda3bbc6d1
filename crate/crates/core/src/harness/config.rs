//! Flat `key = value` experiment files.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated.
//! Every key must be consumed by [`ConfigMap::to_spec`]; a leftover key is
//! reported as unknown so that typos do not silently fall back to defaults.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::spec::{BoundarySpec, ExperimentKind, ExperimentSpec, LabelerSpec, ReportFormat, ThetaSpec};
use crate::anytime_tests::TestConfig;
use crate::boundary_learner::{BoundaryFunction, Bump};
use crate::error::{Error, Result};
use crate::labelers::{AbstentionProfile, LowerBoundLabeler};

#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, (String, usize)>,
    used: RefCell<BTreeSet<String>>,
}

pub fn parse_config(text: &str) -> Result<ConfigMap> {
    let mut map = ConfigMap::default();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {lineno}: expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::config(format!("line {lineno}: malformed key `{key}`")));
        }
        if let Some((_, first)) = map.entries.get(key) {
            return Err(Error::config(format!(
                "line {lineno}: duplicate key `{key}` (first set on line {first})"
            )));
        }
        map.entries.insert(key.to_string(), (value.trim().to_string(), lineno));
    }
    Ok(map)
}

pub fn parse_config_file(path: &Path) -> Result<ConfigMap> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("`{key}`: cannot parse `{v}` as a number")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_theta(key: &str, v: &str) -> Result<ThetaSpec> {
    if v == "uniform" {
        return Ok(ThetaSpec::Uniform { lo: 0.1, hi: 0.9 });
    }
    if let Some(inner) = v.strip_prefix("uniform(").and_then(|s| s.strip_suffix(')')) {
        let b = parse_list(key, inner)?;
        if b.len() != 2 {
            return Err(Error::config(format!("`{key}`: uniform(lo, hi) needs two bounds")));
        }
        return Ok(ThetaSpec::Uniform { lo: b[0], hi: b[1] });
    }
    Ok(ThetaSpec::Fixed {
        value: parse_num(key, v)?,
    })
}

/// `c1/c2/...:radius:height`, several bumps separated by `;`.
fn parse_bumps(key: &str, v: &str) -> Result<Vec<Bump>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|b| {
            let parts: Vec<&str> = b.split(':').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::config(format!(
                    "`{key}`: bump `{b}` must look like center:radius:height"
                )));
            }
            let center = parts[0]
                .split('/')
                .map(|c| parse_num(key, c.trim()))
                .collect::<Result<Vec<f64>>>()?;
            Ok(Bump {
                center,
                radius: parse_num(key, parts[1])?,
                height: parse_num(key, parts[2])?,
            })
        })
        .collect()
}

impl ConfigMap {
    /// Sets or replaces a key, e.g. from a command-line override.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (value.into(), 0));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let (v, _) = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(v.as_str())
    }

    fn num<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key).map(|v| parse_num(key, v)).transpose()
    }

    fn num_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.num(key)?
            .ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key).map(|v| parse_list(key, v)).transpose()
    }

    fn labeler(&self, prefix: &str) -> Result<Option<LabelerSpec>> {
        let Some(family) = self.raw(prefix) else {
            return Ok(None);
        };
        let k = |name: &str| format!("{prefix}.{name}");
        let theta_star = match self.raw(&k("theta_star")) {
            Some(v) => parse_theta(&k("theta_star"), v)?,
            None => ThetaSpec::Fixed { value: 0.5 },
        };
        let profile = match family {
            "power" => AbstentionProfile::Power {
                c_prime: self.num_or(&k("c_prime"), 1.0)?,
                alpha: self.num_or(&k("alpha"), 1.0)?,
            },
            "flat_band" => AbstentionProfile::FlatBand {
                level: self.required(&k("level"))?,
                width: self.required(&k("width"))?,
                c_prime: self.num_or(&k("c_prime"), 1.0)?,
                alpha: self.num_or(&k("alpha"), 1.0)?,
            },
            "constant" => AbstentionProfile::Constant {
                level: self.required(&k("level"))?,
            },
            "table" => AbstentionProfile::Table {
                breakpoints: self
                    .list(&k("breakpoints"))?
                    .ok_or_else(|| Error::config(format!("missing required key `{}`", k("breakpoints"))))?,
                values: self
                    .list(&k("values"))?
                    .ok_or_else(|| Error::config(format!("missing required key `{}`", k("values"))))?,
            },
            "lower_bound" => {
                let l = LowerBoundLabeler::new(
                    self.required(&k("k"))?,
                    self.required(&k("epsilon"))?,
                    self.num_or(&k("alpha"), 1.0)?,
                    self.num_or(&k("beta"), 1.0)?,
                )
                .map_err(|e| Error::config(format!("`{prefix}`: {e}")))?;
                return Ok(Some(LabelerSpec::LowerBound(l)));
            }
            other => {
                return Err(Error::config(format!(
                    "`{prefix}`: unknown labeler family `{other}` \
                     (power|flat_band|constant|table|lower_bound)"
                )))
            }
        };
        profile
            .validate()
            .map_err(|e| Error::config(format!("`{prefix}`: {e}")))?;
        Ok(Some(LabelerSpec::Threshold {
            theta_star,
            profile,
            noise_c: self.num_or(&k("noise_c"), 1.0)?,
            beta: self.num_or(&k("beta"), 1.0)?,
        }))
    }

    fn boundary(&self, fallback: Option<BoundarySpec>) -> Result<Option<BoundarySpec>> {
        let base = fallback.unwrap_or_default();
        let dim = self.num_or("boundary.dim", base.dim)?;
        let holder_k = self.num_or("boundary.holder_k", base.holder_k)?;
        let holder_gamma = self.num_or("boundary.holder_gamma", base.holder_gamma)?;
        let func = match self.raw("boundary") {
            None => base.func,
            Some("quadratic") => BoundaryFunction::Quadratic {
                a: self.num_or("boundary.a", 1.0)?,
                b: self.num_or("boundary.b", 0.4)?,
                c: self.num_or("boundary.c", 0.1)?,
            },
            Some("constant") => BoundaryFunction::Constant {
                value: self.required("boundary.value")?,
            },
            Some("affine") => BoundaryFunction::Affine {
                intercept: self.required("boundary.intercept")?,
                slopes: self
                    .list("boundary.slopes")?
                    .ok_or_else(|| Error::config("missing required key `boundary.slopes`"))?,
            },
            Some("sum_of_bumps") => BoundaryFunction::SumOfBumps {
                base: self.required("boundary.base")?,
                bumps: match self.raw("boundary.bumps") {
                    Some(v) => parse_bumps("boundary.bumps", v)?,
                    None => Vec::new(),
                },
            },
            Some(other) => {
                return Err(Error::config(format!(
                    "unknown boundary family `{other}` (quadratic|constant|affine|sum_of_bumps)"
                )))
            }
        };
        let spec = BoundarySpec {
            dim,
            func,
            holder_k,
            holder_gamma,
        };
        spec.build().map_err(|e| Error::config(format!("`boundary`: {e}")))?;
        Ok(Some(spec))
    }

    /// Builds the experiment of `kind`, starting from its defaults.
    pub fn to_spec(&self, kind: ExperimentKind) -> Result<ExperimentSpec> {
        self.used.borrow_mut().clear();
        let mut spec = ExperimentSpec::defaults(kind);
        if let Some(eps) = self.list("epsilons")? {
            spec.epsilon_list = eps;
        }
        spec.learner.delta = self.num_or("delta", spec.learner.delta)?;
        spec.learner.max_queries = self.num_or("max_queries", spec.learner.max_queries)?;
        let d0 = self.num_or("d0", spec.learner.test_cfg.d0)?;
        let d1 = self.num_or("d1", spec.learner.test_cfg.d1)?;
        spec.learner.test_cfg = TestConfig::new(d0, d1).map_err(|e| Error::config(e.to_string()))?;
        spec.trials = self.num_or("trials", spec.trials)?;
        spec.root_seed = self.num_or("seed", spec.root_seed)?;
        spec.gamma = self.num_or("gamma", spec.gamma)?;
        if let Some(l) = self.labeler("labeler")? {
            spec.labeler = l;
        }
        if let Some(l) = self.labeler("compare")? {
            spec.compare = Some(l);
        }
        if kind == ExperimentKind::Boundary {
            spec.boundary = self.boundary(spec.boundary.take())?;
        }
        spec.calibration.delta = self.num_or("calibration.delta", spec.calibration.delta)?;
        spec.calibration.n_max = self.num_or("calibration.n_max", spec.calibration.n_max)?;
        spec.calibration.trials = self.num_or("calibration.trials", spec.calibration.trials)?;
        if let Some(out) = self.raw("output") {
            spec.output_path = Some(PathBuf::from(out));
        }
        if let Some(f) = self.raw("format") {
            spec.format = f.parse()?;
        }
        let used = self.used.borrow();
        if let Some((key, (_, line))) = self.entries.iter().find(|(k, _)| !used.contains(*k)) {
            let at = if *line > 0 { format!(" (line {line})") } else { String::new() };
            return Err(Error::config(format!(
                "unknown or unused key `{key}`{at} for a {} experiment",
                kind.name()
            )));
        }
        drop(used);
        spec.validate()?;
        Ok(spec)
    }
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_lists_and_families() {
        let text = "\
# consistency run
epsilons = 0.02, 0.01   # two values
delta = 0.2
trials = 7
seed = 42
labeler = flat_band
labeler.theta_star = uniform(0.2, 0.8)
labeler.level = 0.6
labeler.width = 0.1
labeler.beta = 1
";
        let spec = parse_config(text).unwrap().to_spec(ExperimentKind::Consistency).unwrap();
        assert_eq!(spec.epsilon_list, vec![0.02, 0.01]);
        assert_eq!(spec.learner.delta, 0.2);
        assert_eq!(spec.trials, 7);
        assert_eq!(spec.root_seed, 42);
        match spec.labeler {
            LabelerSpec::Threshold {
                theta_star, profile, ..
            } => {
                assert_eq!(theta_star, ThetaSpec::Uniform { lo: 0.2, hi: 0.8 });
                assert_eq!(
                    profile,
                    AbstentionProfile::FlatBand {
                        level: 0.6,
                        width: 0.1,
                        c_prime: 1.0,
                        alpha: 1.0
                    }
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let e = parse_config("trails = 3").unwrap().to_spec(ExperimentKind::Consistency);
        assert!(matches!(e, Err(Error::Config(m)) if m.contains("trails")));
        assert!(matches!(parse_config("a = 1\na = 2"), Err(Error::Config(_))));
        assert!(matches!(parse_config("no equals sign"), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            "delta = 1.5",
            "delta = abc",
            "trials = 0",
            "epsilons = ",
            "labeler = sigmoid",
            "labeler = constant",
            "labeler = power\nlabeler.theta_star = 1.5",
            "format = xml",
        ];
        for text in bad {
            let r = parse_config(text).unwrap().to_spec(ExperimentKind::Consistency);
            assert!(matches!(r, Err(Error::Config(_)) | Err(Error::InvalidParameter(_))), "{text}: {r:?}");
        }
    }

    #[test]
    fn scaling_requires_decreasing_epsilons() {
        let r = parse_config("epsilons = 0.01, 0.02, 0.005")
            .unwrap()
            .to_spec(ExperimentKind::Scaling);
        assert!(matches!(r, Err(Error::Config(_))));
        let r = parse_config("epsilons = 0.02, 0.01").unwrap().to_spec(ExperimentKind::Scaling);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn adaptivity_requires_shared_beta() {
        let text = "labeler = power\nlabeler.beta = 1\ncompare = constant\ncompare.level = 0.5\ncompare.beta = 2";
        let r = parse_config(text).unwrap().to_spec(ExperimentKind::Adaptivity);
        assert!(matches!(r, Err(Error::Config(m)) if m.contains("beta")));
    }

    #[test]
    fn boundary_families() {
        let text = "boundary = sum_of_bumps\nboundary.base = 0.5\nboundary.bumps = 0.3:0.2:0.1; 0.7:0.2:-0.1\n\
                    boundary.holder_gamma = 2";
        let spec = parse_config(text).unwrap().to_spec(ExperimentKind::Boundary).unwrap();
        let b = spec.boundary.unwrap();
        match b.func {
            BoundaryFunction::SumOfBumps { base, bumps } => {
                assert_eq!(base, 0.5);
                assert_eq!(bumps.len(), 2);
                assert_eq!(bumps[1].center, vec![0.7]);
                assert_eq!(bumps[1].height, -0.1);
            }
            other => panic!("unexpected {other:?}"),
        }
        let r = parse_config("boundary = constant\nboundary.value = 1.4")
            .unwrap()
            .to_spec(ExperimentKind::Boundary);
        assert!(r.is_err());
    }

    #[test]
    fn lower_bound_family() {
        let text = "labeler = lower_bound\nlabeler.k = 2\nlabeler.epsilon = 0.01";
        let spec = parse_config(text).unwrap().to_spec(ExperimentKind::Consistency).unwrap();
        assert_eq!(
            spec.labeler,
            LabelerSpec::LowerBound(LowerBoundLabeler::new(2, 0.01, 1.0, 1.0).unwrap())
        );
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut map = parse_config("seed = 1\ntrials = 3").unwrap();
        map.set("seed", "99");
        let spec = map.to_spec(ExperimentKind::Consistency).unwrap();
        assert_eq!(spec.root_seed, 99);
        assert_eq!(spec.trials, 3);
    }
}
