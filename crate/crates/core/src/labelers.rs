//! Synthetic labelers that may abstain (⊥) or flip labels.
//!
//! A labeler with ground-truth boundary `g*` answers a query `x` by looking at
//! the distance `t = |x_d - g*(x̃)|` to the boundary: it abstains with
//! probability `1 - f(t)` (the [`AbstentionProfile`]) and, when it answers,
//! flips the true label `1[x_d > g*(x̃)]` with probability
//! `max(0, 1 - C min(t, 1)^β) / 2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boundary_learner::SmoothBoundary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Response {
    Label0,
    Label1,
    Abstain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseDistribution {
    pub p_abstain: f64,
    pub p_label1: f64,
    pub p_label0: f64,
}

impl ResponseDistribution {
    /// Builds the distribution from the answer rate `f`, the flip probability
    /// and the noiseless label.
    fn from_parts(answer_rate: f64, flip: f64, truth: Response) -> Self {
        let wrong = answer_rate * flip;
        let right = answer_rate - wrong;
        let (p_label1, p_label0) = match truth {
            Response::Label1 => (right, wrong),
            _ => (wrong, right),
        };
        ResponseDistribution {
            p_abstain: 1.0 - answer_rate,
            p_label1,
            p_label0,
        }
    }

    /// Conditional flip rate given a 0/1 answer; `None` when the labeler
    /// always abstains.
    pub fn conditional_flip(&self, truth: Response) -> Option<f64> {
        let answered = self.p_label0 + self.p_label1;
        if answered <= 0.0 {
            return None;
        }
        let wrong = match truth {
            Response::Label1 => self.p_label0,
            _ => self.p_label1,
        };
        Some(wrong / answered)
    }

    pub fn sampler(&self) -> ResponseSampler {
        ResponseSampler {
            abstain_below: self.p_abstain,
            label1_below: self.p_abstain + self.p_label1,
        }
    }
}

/// Inverse-CDF sampler over `[⊥ | 1 | 0]`, one uniform draw per response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseSampler {
    abstain_below: f64,
    label1_below: f64,
}

impl ResponseSampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Response {
        let u: f64 = rng.gen();
        if u < self.abstain_below {
            Response::Abstain
        } else if u < self.label1_below {
            Response::Label1
        } else {
            Response::Label0
        }
    }
}

/// The answer-rate function `f`; the labeler abstains with probability
/// `1 - f(distance)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AbstentionProfile {
    /// `f(t) = c' t^α`.
    Power { c_prime: f64, alpha: f64 },
    /// Abstains with probability `level` within `width` of the boundary and
    /// follows `max(1 - level, c' t^α)` further out.
    FlatBand {
        level: f64,
        width: f64,
        c_prime: f64,
        alpha: f64,
    },
    /// Abstains with probability `level` everywhere.
    Constant { level: f64 },
    /// Piecewise-linear `f` through `(breakpoints[i], values[i])`, constant
    /// beyond the end points.
    Table { breakpoints: Vec<f64>, values: Vec<f64> },
}

fn probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl AbstentionProfile {
    pub fn power(c_prime: f64, alpha: f64) -> Result<Self> {
        let p = AbstentionProfile::Power { c_prime, alpha };
        p.validate()?;
        Ok(p)
    }

    /// The flat band `[lo, hi]` in query coordinates, which must be centred
    /// on `theta_star`, continued by `c' t^α` outside.
    pub fn flat_band_around(
        level: f64,
        lo: f64,
        hi: f64,
        theta_star: f64,
        c_prime: f64,
        alpha: f64,
    ) -> Result<Self> {
        let width = (hi - lo) / 2.0;
        if !(lo <= theta_star && theta_star <= hi) || ((lo + hi) / 2.0 - theta_star).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "flat band [{lo}, {hi}] is not centred on theta* = {theta_star}"
            )));
        }
        let p = AbstentionProfile::FlatBand {
            level,
            width,
            c_prime,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn table(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let p = AbstentionProfile::Table { breakpoints, values };
        p.validate()?;
        Ok(p)
    }

    /// Parameter ranges. Monotonicity of a `Table` is not required here; see
    /// [`AbstentionProfile::is_nondecreasing`].
    pub fn validate(&self) -> Result<()> {
        match self {
            AbstentionProfile::Power { c_prime, alpha } => {
                if !(*c_prime > 0.0 && *c_prime <= 1.0) {
                    return Err(Error::invalid(format!("c' must lie in (0, 1], got {c_prime}")));
                }
                if !(*alpha >= 0.0 && alpha.is_finite()) {
                    return Err(Error::invalid(format!("alpha must be nonnegative, got {alpha}")));
                }
            }
            AbstentionProfile::FlatBand {
                level,
                width,
                c_prime,
                alpha,
            } => {
                probability("flat band level", *level)?;
                if !(*width >= 0.0) {
                    return Err(Error::invalid(format!("band width must be nonnegative, got {width}")));
                }
                AbstentionProfile::Power {
                    c_prime: *c_prime,
                    alpha: *alpha,
                }
                .validate()?;
            }
            AbstentionProfile::Constant { level } => probability("constant level", *level)?,
            AbstentionProfile::Table { breakpoints, values } => {
                if breakpoints.is_empty() || breakpoints.len() != values.len() {
                    return Err(Error::invalid(
                        "table needs equally many breakpoints and values (at least one)",
                    ));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::invalid("table breakpoints must be strictly increasing"));
                }
                for &v in values {
                    probability("table value", v)?;
                }
            }
        }
        Ok(())
    }

    /// `f(t)` for a distance `t >= 0`.
    pub fn answer_rate(&self, t: f64) -> f64 {
        match self {
            AbstentionProfile::Power { c_prime, alpha } => (c_prime * t.powf(*alpha)).min(1.0),
            AbstentionProfile::FlatBand {
                level,
                width,
                c_prime,
                alpha,
            } => {
                let floor = 1.0 - level;
                if t <= *width {
                    floor
                } else {
                    floor.max((c_prime * t.powf(*alpha)).min(1.0))
                }
            }
            AbstentionProfile::Constant { level } => 1.0 - level,
            AbstentionProfile::Table { breakpoints, values } => {
                let i = breakpoints.partition_point(|&b| b <= t);
                if i == 0 {
                    values[0]
                } else if i == breakpoints.len() {
                    values[i - 1]
                } else {
                    let (t0, t1) = (breakpoints[i - 1], breakpoints[i]);
                    let (v0, v1) = (values[i - 1], values[i]);
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    pub fn abstention(&self, t: f64) -> f64 {
        1.0 - self.answer_rate(t)
    }

    /// Grid check that `f` is nondecreasing on `[0, 1]`.
    pub fn is_nondecreasing(&self, grid_resolution: usize) -> bool {
        let n = grid_resolution.max(1);
        (0..n).all(|i| {
            let a = self.answer_rate(i as f64 / n as f64);
            let b = self.answer_rate((i + 1) as f64 / n as f64);
            b >= a - 1e-12
        })
    }
}

#[inline]
fn flip_probability(noise_c: f64, beta: f64, t: f64) -> f64 {
    (1.0 - noise_c * t.min(1.0).powf(beta)).max(0.0) / 2.0
}

fn check_noise(noise_c: f64, beta: f64) -> Result<()> {
    probability("noise constant C", noise_c)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be nonnegative, got {beta}")));
    }
    Ok(())
}

fn check_point(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    Ok(())
}

/// A stochastic oracle `P_L(Y | X = x)` on `[0, 1]^d`.
pub trait Labeler {
    fn dim(&self) -> usize;

    /// Response law at `x`; errors when `x` is outside `[0, 1]^d`.
    fn distribution_at(&self, x: &[f64]) -> Result<ResponseDistribution>;

    /// The noiseless label `1[x_d > g*(x̃)]` as a response.
    fn true_label(&self, x: &[f64]) -> Result<Response>;

    /// Distance from `x` to the boundary along the last axis.
    fn boundary_distance(&self, x: &[f64]) -> Result<f64>;

    fn respond<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Response>
    where
        Self: Sized,
    {
        Ok(self.distribution_at(x)?.sampler().sample(rng))
    }
}

impl<L: Labeler + ?Sized> Labeler for &L {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn distribution_at(&self, x: &[f64]) -> Result<ResponseDistribution> {
        (**self).distribution_at(x)
    }
    fn true_label(&self, x: &[f64]) -> Result<Response> {
        (**self).true_label(x)
    }
    fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        (**self).boundary_distance(x)
    }
}

fn side(x: f64, boundary: f64) -> Response {
    if x > boundary {
        Response::Label1
    } else {
        Response::Label0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdLabeler {
    pub theta_star: f64,
    pub profile: AbstentionProfile,
    pub noise_c: f64,
    pub beta: f64,
}

impl ThresholdLabeler {
    pub fn new(theta_star: f64, profile: AbstentionProfile, noise_c: f64, beta: f64) -> Result<Self> {
        probability("theta*", theta_star)?;
        profile.validate()?;
        check_noise(noise_c, beta)?;
        Ok(ThresholdLabeler {
            theta_star,
            profile,
            noise_c,
            beta,
        })
    }

    /// Never abstains, never flips.
    pub fn noiseless(theta_star: f64) -> Result<Self> {
        Self::new(theta_star, AbstentionProfile::Constant { level: 0.0 }, 1.0, 0.0)
    }

    pub fn flip_probability(&self, t: f64) -> f64 {
        flip_probability(self.noise_c, self.beta, t)
    }
}

impl Labeler for ThresholdLabeler {
    fn dim(&self) -> usize {
        1
    }

    fn distribution_at(&self, x: &[f64]) -> Result<ResponseDistribution> {
        check_point(x, 1)?;
        let t = (x[0] - self.theta_star).abs();
        Ok(ResponseDistribution::from_parts(
            self.profile.answer_rate(t),
            self.flip_probability(t),
            side(x[0], self.theta_star),
        ))
    }

    fn true_label(&self, x: &[f64]) -> Result<Response> {
        check_point(x, 1)?;
        Ok(side(x[0], self.theta_star))
    }

    fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        check_point(x, 1)?;
        Ok((x[0] - self.theta_star).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLabeler {
    pub boundary: SmoothBoundary,
    pub profile: AbstentionProfile,
    pub noise_c: f64,
    pub beta: f64,
}

impl BoundaryLabeler {
    pub fn new(boundary: SmoothBoundary, profile: AbstentionProfile, noise_c: f64, beta: f64) -> Result<Self> {
        if boundary.dim < 2 {
            return Err(Error::invalid(format!(
                "boundary labelers need dimension >= 2, got {}",
                boundary.dim
            )));
        }
        profile.validate()?;
        check_noise(noise_c, beta)?;
        Ok(BoundaryLabeler {
            boundary,
            profile,
            noise_c,
            beta,
        })
    }

    pub fn noiseless(boundary: SmoothBoundary) -> Result<Self> {
        Self::new(boundary, AbstentionProfile::Constant { level: 0.0 }, 1.0, 0.0)
    }

    fn split<'a>(&self, x: &'a [f64]) -> Result<(&'a [f64], f64)> {
        check_point(x, self.boundary.dim)?;
        let (head, last) = x.split_at(x.len() - 1);
        Ok((head, last[0]))
    }

    /// The one-dimensional labeler seen along the grid line through `x̃`.
    pub fn restrict(&self, x_tilde: &[f64]) -> Result<LineRestriction<'_>> {
        if x_tilde.len() + 1 != self.boundary.dim {
            return Err(Error::DimensionMismatch {
                expected: self.boundary.dim - 1,
                got: x_tilde.len(),
            });
        }
        if x_tilde.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutsideDomain(x_tilde.to_vec()));
        }
        Ok(LineRestriction {
            labeler: self,
            x_tilde: x_tilde.to_vec(),
        })
    }
}

impl Labeler for BoundaryLabeler {
    fn dim(&self) -> usize {
        self.boundary.dim
    }

    fn distribution_at(&self, x: &[f64]) -> Result<ResponseDistribution> {
        let (head, xd) = self.split(x)?;
        let g = self.boundary.eval(head);
        let t = (xd - g).abs();
        Ok(ResponseDistribution::from_parts(
            self.profile.answer_rate(t),
            flip_probability(self.noise_c, self.beta, t),
            side(xd, g),
        ))
    }

    fn true_label(&self, x: &[f64]) -> Result<Response> {
        let (head, xd) = self.split(x)?;
        Ok(side(xd, self.boundary.eval(head)))
    }

    fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        let (head, xd) = self.split(x)?;
        Ok((xd - self.boundary.eval(head)).abs())
    }
}

/// `x_d ↦ L(x̃, x_d)` for a fixed `x̃`.
#[derive(Debug, Clone)]
pub struct LineRestriction<'a> {
    labeler: &'a BoundaryLabeler,
    x_tilde: Vec<f64>,
}

impl LineRestriction<'_> {
    fn lift(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(x, 1)?;
        let mut full = self.x_tilde.clone();
        full.push(x[0]);
        Ok(full)
    }

    pub fn boundary_value(&self) -> f64 {
        self.labeler.boundary.eval(&self.x_tilde)
    }
}

impl Labeler for LineRestriction<'_> {
    fn dim(&self) -> usize {
        1
    }
    fn distribution_at(&self, x: &[f64]) -> Result<ResponseDistribution> {
        self.labeler.distribution_at(&self.lift(x)?)
    }
    fn true_label(&self, x: &[f64]) -> Result<Response> {
        self.labeler.true_label(&self.lift(x)?)
    }
    fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        self.labeler.boundary_distance(&self.lift(x)?)
    }
}

/// The hard instance `P_{L_k}` with boundary `θ_k = 1/2 + kε`: abstains with
/// probability `1 - |x - θ_k|^α` and, when answering, reports the true label
/// with probability `(1 + |x - θ_k|^β) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundLabeler {
    pub k: u8,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl LowerBoundLabeler {
    pub fn new(k: u8, epsilon: f64, alpha: f64, beta: f64) -> Result<Self> {
        if k > 3 {
            return Err(Error::invalid(format!("k must be in 0..=3, got {k}")));
        }
        if !(epsilon > 0.0 && 0.5 + 3.0 * epsilon <= 1.0) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1/6], got {epsilon}")));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be nonnegative, got {beta}")));
        }
        Ok(LowerBoundLabeler {
            k,
            epsilon,
            alpha,
            beta,
        })
    }

    /// `¼ min{(½)^{1/β}, (4/5)^{1/α}, ¼}`, the largest ε for which the
    /// construction is meant to be used.
    pub fn max_epsilon(alpha: f64, beta: f64) -> f64 {
        0.25 * 0.5f64.powf(1.0 / beta).min(0.8f64.powf(1.0 / alpha)).min(0.25)
    }

    pub fn theta(&self) -> f64 {
        0.5 + self.k as f64 * self.epsilon
    }

    /// The answer rate `t^α` as an [`AbstentionProfile`].
    pub fn abstention_profile(&self) -> AbstentionProfile {
        AbstentionProfile::Power {
            c_prime: 1.0,
            alpha: self.alpha,
        }
    }
}

impl Labeler for LowerBoundLabeler {
    fn dim(&self) -> usize {
        1
    }

    fn distribution_at(&self, x: &[f64]) -> Result<ResponseDistribution> {
        check_point(x, 1)?;
        let theta = self.theta();
        let t = (x[0] - theta).abs();
        let answer = t.powf(self.alpha);
        let bias = t.powf(self.beta);
        let agree = answer * (1.0 + bias) / 2.0;
        let disagree = answer * (1.0 - bias) / 2.0;
        let (p_label1, p_label0) = if x[0] > theta {
            (agree, disagree)
        } else {
            (disagree, agree)
        };
        Ok(ResponseDistribution {
            p_abstain: 1.0 - answer,
            p_label1,
            p_label0,
        })
    }

    fn true_label(&self, x: &[f64]) -> Result<Response> {
        check_point(x, 1)?;
        Ok(side(x[0], self.theta()))
    }

    fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        check_point(x, 1)?;
        Ok((x[0] - self.theta()).abs())
    }
}

/// Any of the shipped labeler families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LabelerModel {
    Threshold(ThresholdLabeler),
    Boundary(BoundaryLabeler),
    LowerBound(LowerBoundLabeler),
}

impl Labeler for LabelerModel {
    fn dim(&self) -> usize {
        match self {
            LabelerModel::Threshold(l) => l.dim(),
            LabelerModel::Boundary(l) => l.dim(),
            LabelerModel::LowerBound(l) => l.dim(),
        }
    }
    fn distribution_at(&self, x: &[f64]) -> Result<ResponseDistribution> {
        match self {
            LabelerModel::Threshold(l) => l.distribution_at(x),
            LabelerModel::Boundary(l) => l.distribution_at(x),
            LabelerModel::LowerBound(l) => l.distribution_at(x),
        }
    }
    fn true_label(&self, x: &[f64]) -> Result<Response> {
        match self {
            LabelerModel::Threshold(l) => l.true_label(x),
            LabelerModel::Boundary(l) => l.true_label(x),
            LabelerModel::LowerBound(l) => l.true_label(x),
        }
    }
    fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        match self {
            LabelerModel::Threshold(l) => l.boundary_distance(x),
            LabelerModel::Boundary(l) => l.boundary_distance(x),
            LabelerModel::LowerBound(l) => l.boundary_distance(x),
        }
    }
}

const TOL: f64 = 1e-12;

/// Checks one line of `(distance, abstention, conditional flip)` triples.
fn line_satisfies_condition1(mut points: Vec<(f64, f64, Option<f64>)>) -> bool {
    if points
        .iter()
        .any(|&(_, _, flip)| flip.is_some_and(|f| f > 0.5 + TOL))
    {
        return false;
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Walking outwards, abstention may never rise; equal distances must agree.
    let mut i = 0;
    let mut ceiling = f64::INFINITY;
    while i < points.len() {
        let mut j = i;
        let (mut lo, mut hi) = (points[i].1, points[i].1);
        while j < points.len() && points[j].0 - points[i].0 <= TOL {
            lo = lo.min(points[j].1);
            hi = hi.max(points[j].1);
            j += 1;
        }
        if hi - lo > TOL || hi > ceiling + TOL {
            return false;
        }
        ceiling = lo;
        i = j;
    }
    true
}

/// Grid check of monotone abstention in the distance to the boundary and of
/// conditional flip rates at most ½, along every grid line in the last axis.
pub fn verify_condition1<L: Labeler>(model: &L, grid_resolution: usize) -> Result<bool> {
    if grid_resolution < 10 {
        return Err(Error::invalid("condition 1 grid needs at least 10 points per axis"));
    }
    let dim = model.dim();
    let res = grid_resolution;
    let lines = res.pow((dim - 1) as u32);
    let mut x = vec![0.0; dim];
    for line in 0..lines {
        let mut rest = line;
        for slot in x.iter_mut().take(dim - 1) {
            *slot = (rest % res) as f64 / (res - 1) as f64;
            rest /= res;
        }
        let mut points = Vec::with_capacity(res + 1);
        for i in 0..=res {
            x[dim - 1] = i as f64 / res as f64;
            let dist = model.distribution_at(&x)?;
            let truth = model.true_label(&x)?;
            points.push((model.boundary_distance(&x)?, dist.p_abstain, dist.conditional_flip(truth)));
        }
        if !line_satisfies_condition1(points) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Grid check of `f(b) / f(a) <= 1 - c` for `0 < a <= 1`, `0 <= b <= 2a/3`.
pub fn verify_condition3(profile: &AbstentionProfile, c: f64, grid_resolution: usize) -> bool {
    let res = grid_resolution.max(1);
    let bound = 1.0 - c;
    for i in 1..=res {
        let a = i as f64 / res as f64;
        let fa = profile.answer_rate(a);
        for j in 0..=res {
            let b = (2.0 / 3.0) * a * j as f64 / res as f64;
            let fb = profile.answer_rate(b);
            let ok = if fa <= 0.0 {
                fb <= 0.0
            } else {
                fb / fa <= bound + TOL
            };
            if !ok {
                return false;
            }
        }
    }
    true
}

/// The `c` that makes `f(t) = c' t^α` satisfy the non-flatness condition with
/// equality at `b = 2a/3`.
pub fn power_condition3_constant(alpha: f64) -> f64 {
    1.0 - (2.0f64 / 3.0).powf(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_learner::BoundaryFunction;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    fn sqrt_profile() -> AbstentionProfile {
        AbstentionProfile::power(1.0, 0.5).unwrap()
    }

    fn fig2_band() -> AbstentionProfile {
        AbstentionProfile::flat_band_around(0.68, 0.2, 0.4, 0.3, 1.0, 1.0).unwrap()
    }

    #[test]
    fn power_profile_abstains_surely_on_the_boundary() {
        let l = ThresholdLabeler::new(0.3, sqrt_profile(), 1.0, 1.0).unwrap();
        let d = l.distribution_at(&[0.3]).unwrap();
        assert_eq!(d.p_abstain, 1.0);
        let d = l.distribution_at(&[0.55]).unwrap();
        assert!((d.p_abstain - (1.0 - 0.25f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn flat_band_level_inside_band() {
        let l = ThresholdLabeler::new(0.3, fig2_band(), 1.0, 1.0).unwrap();
        for x in [0.2, 0.25, 0.3, 0.37, 0.4] {
            assert!((l.distribution_at(&[x]).unwrap().p_abstain - 0.68).abs() < 1e-12);
        }
        assert!(l.distribution_at(&[0.9]).unwrap().p_abstain < 0.68);
        assert!(AbstentionProfile::flat_band_around(0.68, 0.2, 0.4, 0.35, 1.0, 1.0).is_err());
    }

    #[test]
    fn lower_bound_labeler_matches_displayed_formulas() {
        for alpha in [0.5, 1.0, 2.0] {
            let l = LowerBoundLabeler::new(0, 0.01, alpha, 1.0).unwrap();
            assert_eq!(l.distribution_at(&[0.5]).unwrap().p_abstain, 1.0);
        }
        let l = LowerBoundLabeler::new(2, 0.01, 1.0, 2.0).unwrap();
        // x = 0.8 > θ = 0.52, t = 0.28
        let d = l.distribution_at(&[0.8]).unwrap();
        let t: f64 = 0.28;
        assert!((d.p_abstain - (1.0 - t)).abs() < 1e-12);
        assert!((d.p_label0 - t * (1.0 - t * t) / 2.0).abs() < 1e-12);
        assert!((d.p_label1 - t * (1.0 + t * t) / 2.0).abs() < 1e-12);
        // x = 0.1 <= θ, t = 0.42
        let d = l.distribution_at(&[0.1]).unwrap();
        let t: f64 = 0.42;
        assert!((d.p_label0 - t * (1.0 + t * t) / 2.0).abs() < 1e-12);
        assert!((d.p_label1 - t * (1.0 - t * t) / 2.0).abs() < 1e-12);
        assert!(LowerBoundLabeler::new(4, 0.01, 1.0, 1.0).is_err());
    }

    #[test]
    fn noiseless_labeler_is_deterministic() {
        let l = ThresholdLabeler::noiseless(0.3).unwrap();
        let mut rng = stream_rng(1);
        for _ in 0..1000 {
            assert_eq!(l.respond(&[0.7], &mut rng).unwrap(), Response::Label1);
            assert_eq!(l.respond(&[0.1], &mut rng).unwrap(), Response::Label0);
        }
    }

    #[test]
    fn zero_beta_gives_uniform_flip_rate() {
        let l = ThresholdLabeler::new(0.4, sqrt_profile(), 0.6, 0.0).unwrap();
        for x in [0.0, 0.4, 0.41, 1.0] {
            assert!((l.flip_probability((x - 0.4f64).abs()) - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_domain_queries_are_rejected() {
        let l = ThresholdLabeler::noiseless(0.3).unwrap();
        assert!(matches!(l.distribution_at(&[1.2]), Err(Error::OutsideDomain(_))));
        assert!(matches!(l.distribution_at(&[0.1, 0.2]), Err(Error::DimensionMismatch { .. })));
        let b = BoundaryLabeler::noiseless(SmoothBoundary::reference_quadratic()).unwrap();
        assert!(b.distribution_at(&[0.5, -0.01]).is_err());
    }

    #[test]
    fn respond_frequencies_match_distribution() {
        let l = ThresholdLabeler::new(0.3, sqrt_profile(), 0.8, 1.0).unwrap();
        let x = [0.42];
        let d = l.distribution_at(&x).unwrap();
        let mut rng = stream_rng(99);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            match l.respond(&x, &mut rng).unwrap() {
                Response::Abstain => counts[0] += 1,
                Response::Label1 => counts[1] += 1,
                Response::Label0 => counts[2] += 1,
            }
        }
        let probs = [d.p_abstain, d.p_label1, d.p_label0];
        let mut chi2 = 0.0;
        for (c, p) in counts.iter().zip(probs) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let freq = *c as f64 / n as f64;
            assert!((freq - p).abs() <= 4.0 * se, "freq {freq} vs {p}");
            chi2 += (*c as f64 - n as f64 * p).powi(2) / (n as f64 * p);
        }
        // χ²(2) upper 0.001 quantile.
        assert!(chi2 < 13.816, "chi2 = {chi2}");
    }

    #[test]
    fn condition1_verifier() {
        let power = ThresholdLabeler::new(0.3, sqrt_profile(), 1.0, 1.0).unwrap();
        assert!(verify_condition1(&power, 512).unwrap());
        let band = ThresholdLabeler::new(0.3, fig2_band(), 1.0, 1.0).unwrap();
        assert!(verify_condition1(&band, 512).unwrap());
        let bad = AbstentionProfile::table(vec![0.0, 0.2, 0.4, 1.0], vec![0.1, 0.6, 0.3, 0.9]).unwrap();
        assert!(!bad.is_nondecreasing(512));
        let l = ThresholdLabeler::new(0.5, bad, 1.0, 1.0).unwrap();
        assert!(!verify_condition1(&l, 512).unwrap());
        let b = BoundaryLabeler::new(SmoothBoundary::reference_quadratic(), sqrt_profile(), 1.0, 1.0).unwrap();
        assert!(verify_condition1(&b, 64).unwrap());
        assert!(verify_condition1(&power, 5).is_err());
    }

    #[test]
    fn condition3_verifier() {
        for alpha in [0.5, 1.0, 2.0] {
            let p = AbstentionProfile::power(1.0, alpha).unwrap();
            let c = power_condition3_constant(alpha);
            assert!(verify_condition3(&p, c, 512));
            assert!(!verify_condition3(&p, c + 0.05, 512));
        }
        assert!(!verify_condition3(&fig2_band(), 0.01, 512));
        assert!(!verify_condition3(&AbstentionProfile::Constant { level: 0.5 }, 0.01, 512));
    }

    #[test]
    fn lower_bound_instances_satisfy_conditions() {
        for (alpha, beta) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)] {
            let eps = LowerBoundLabeler::max_epsilon(alpha, beta);
            for k in 0..4 {
                let l = LowerBoundLabeler::new(k, eps, alpha, beta).unwrap();
                assert!(verify_condition1(&l, 512).unwrap());
                let profile = AbstentionProfile::power(1.0, alpha).unwrap();
                assert!(verify_condition3(&profile, power_condition3_constant(alpha), 512));
            }
        }
    }

    #[test]
    fn restriction_sees_boundary_value() {
        let b = BoundaryLabeler::noiseless(SmoothBoundary::reference_quadratic()).unwrap();
        let line = b.restrict(&[0.9]).unwrap();
        assert!((line.boundary_value() - 0.35).abs() < 1e-12);
        assert_eq!(line.true_label(&[0.36]).unwrap(), Response::Label1);
        assert_eq!(line.true_label(&[0.34]).unwrap(), Response::Label0);
        assert!(b.restrict(&[0.1, 0.2]).is_err());
        let _ = BoundaryFunction::Constant { value: 0.5 };
    }

    fn any_profile() -> impl Strategy<Value = AbstentionProfile> {
        prop_oneof![
            (0.01f64..=1.0, 0.0f64..3.0).prop_map(|(c, a)| AbstentionProfile::Power { c_prime: c, alpha: a }),
            (0.0f64..=1.0, 0.0f64..0.5, 0.01f64..=1.0, 0.0f64..3.0).prop_map(|(level, width, c, a)| {
                AbstentionProfile::FlatBand { level, width, c_prime: c, alpha: a }
            }),
            (0.0f64..=1.0).prop_map(|level| AbstentionProfile::Constant { level }),
            prop::collection::vec(0.0f64..=1.0, 1..6).prop_map(|values| {
                let n = values.len();
                let breakpoints = (0..n).map(|i| i as f64 / n as f64).collect();
                AbstentionProfile::Table { breakpoints, values }
            }),
        ]
    }

    proptest! {
        #[test]
        fn distributions_are_probability_vectors(
            profile in any_profile(),
            theta in 0.0f64..=1.0,
            c in 0.0f64..=1.0,
            beta in 0.0f64..4.0,
            x in 0.0f64..=1.0,
        ) {
            let l = ThresholdLabeler::new(theta, profile, c, beta).unwrap();
            let d = l.distribution_at(&[x]).unwrap();
            for p in [d.p_abstain, d.p_label0, d.p_label1] {
                prop_assert!((0.0..=1.0).contains(&p));
            }
            prop_assert!((d.p_abstain + d.p_label0 + d.p_label1 - 1.0).abs() <= 1e-12);
            let flip = l.flip_probability((x - theta).abs());
            prop_assert!((0.0..=0.5).contains(&flip));
        }

        #[test]
        fn lower_bound_distributions_sum_to_one(
            k in 0u8..4, eps in 0.001f64..0.16, alpha in 0.01f64..=2.0, beta in 0.0f64..4.0, x in 0.0f64..=1.0,
        ) {
            let l = LowerBoundLabeler::new(k, eps, alpha, beta).unwrap();
            let d = l.distribution_at(&[x]).unwrap();
            for p in [d.p_abstain, d.p_label0, d.p_label1] {
                prop_assert!((0.0..=1.0).contains(&p));
            }
            prop_assert!((d.p_abstain + d.p_label0 + d.p_label1 - 1.0).abs() <= 1e-12);
        }
    }
}
