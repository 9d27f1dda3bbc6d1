//! Quartile binary search for a one-dimensional threshold.
//!
//! Round `k` keeps an interval `[L_k, R_k]` believed to contain `θ*` and
//! queries its quartiles `U, M, V` once each per inner iteration. Two kinds
//! of evidence can shrink the interval to `[U, R]` or `[L, V]`:
//!
//! * more answers (fewer abstentions) at `U` (resp. `V`) than at `M`, tested
//!   with the empirical-variance test;
//! * a majority of 0 labels at `U` (resp. 1 labels at `V`), tested with the
//!   LIL test.
//!
//! The four tests are evaluated in that order after every iteration and the
//! first one to fire ends the round. Each round shrinks the interval by ¾, so
//! `ceil(log_{4/3}(1/2ε))` rounds leave an interval of length at most `2ε`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anytime_tests::{RunningSum, SequentialTests, TestConfig};
use crate::error::{Error, Result};
use crate::labelers::{Labeler, Response};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub test_cfg: TestConfig,
    pub max_queries: u64,
}

impl LearnerConfig {
    pub fn new(epsilon: f64, delta: f64, test_cfg: TestConfig, max_queries: u64) -> Result<Self> {
        let cfg = LearnerConfig {
            epsilon,
            delta,
            test_cfg,
            max_queries,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 0.5) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1/2], got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    /// Confidence handed to every individual test: `δ / (4 · rounds)`.
    pub fn per_check_delta(&self) -> Result<f64> {
        let rounds = num_rounds(self.epsilon)?;
        Ok(if rounds == 0 {
            self.delta
        } else {
            self.delta / (4.0 * rounds as f64)
        })
    }
}

/// `ceil(log_{4/3}(1 / 2ε))`.
pub fn num_rounds(epsilon: f64) -> Result<u32> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1/2], got {epsilon}")));
    }
    let exact = (1.0 / (2.0 * epsilon)).ln() / (4.0f64 / 3.0).ln();
    Ok((exact - 1e-9).ceil().max(0.0) as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalState {
    pub lo: f64,
    pub hi: f64,
    pub round: u32,
}

impl IntervalState {
    pub fn unit() -> Self {
        IntervalState {
            lo: 0.0,
            hi: 1.0,
            round: 0,
        }
    }

    pub fn midpoint(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    fn keep_upper(&self, u: f64) -> Self {
        IntervalState {
            lo: u,
            hi: self.hi,
            round: self.round + 1,
        }
    }

    fn keep_lower(&self, v: f64) -> Self {
        IntervalState {
            lo: self.lo,
            hi: v,
            round: self.round + 1,
        }
    }
}

/// `(U, M, V) = ((3L + R)/4, (L + R)/2, (L + 3R)/4)`.
pub fn quartiles(state: &IntervalState) -> (f64, f64, f64) {
    let (l, r) = (state.lo, state.hi);
    ((3.0 * l + r) / 4.0, (l + r) / 2.0, (l + 3.0 * r) / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trigger {
    VarU,
    VarV,
    LabelU,
    LabelV,
    Budget,
}

impl Trigger {
    pub fn is_abstention_test(self) -> bool {
        matches!(self, Trigger::VarU | Trigger::VarV)
    }

    pub fn is_label_test(self) -> bool {
        matches!(self, Trigger::LabelU | Trigger::LabelV)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub inner_iterations: u64,
    pub trigger: Trigger,
    pub queries_used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub theta_hat: f64,
    pub total_queries: u64,
    pub rounds: Vec<RoundRecord>,
    pub stop_reason: StopReason,
}

impl ThresholdResult {
    pub fn completed(&self) -> bool {
        self.stop_reason == StopReason::Completed
    }
}

/// `1` if the labeler answered, `0` on abstention.
#[inline]
fn answered(r: Response) -> f64 {
    if r == Response::Abstain {
        0.0
    } else {
        1.0
    }
}

/// Runs one round from `state` with at most `budget` queries.
///
/// On `Trigger::Budget` the returned state is `state` itself.
pub fn run_round<L: Labeler, R: Rng + ?Sized>(
    state: &IntervalState,
    labeler: &L,
    per_check_delta: f64,
    cfg: &LearnerConfig,
    budget: u64,
    rng: &mut R,
) -> Result<(IntervalState, RoundRecord)> {
    let tests = SequentialTests::new(per_check_delta, cfg.test_cfg)?;
    let (u, m, v) = quartiles(state);
    let at_u = labeler.distribution_at(&[u])?.sampler();
    let at_m = labeler.distribution_at(&[m])?.sampler();
    let at_v = labeler.distribution_at(&[v])?.sampler();

    // A^(u) - A^(m), A^(v) - A^(m), -B^(u), B^(v)
    let mut gap_u = RunningSum::default();
    let mut gap_v = RunningSum::default();
    let mut zeros_u = RunningSum::default();
    let mut ones_v = RunningSum::default();

    let mut n = 0u64;
    let record = |n: u64, trigger| RoundRecord {
        round: state.round,
        inner_iterations: n,
        trigger,
        queries_used: 3 * n,
    };
    loop {
        if budget.saturating_sub(3 * n) < 3 {
            return Ok((*state, record(n, Trigger::Budget)));
        }
        n += 1;
        let yu = at_u.sample(rng);
        let ym = at_m.sample(rng);
        let yv = at_v.sample(rng);

        let am = answered(ym);
        gap_u.push(answered(yu) - am);
        gap_v.push(answered(yv) - am);
        match yu {
            Response::Label0 => zeros_u.push(1.0),
            Response::Label1 => zeros_u.push(-1.0),
            Response::Abstain => {}
        }
        match yv {
            Response::Label1 => ones_v.push(1.0),
            Response::Label0 => ones_v.push(-1.0),
            Response::Abstain => {}
        }

        let trigger = if tests.significant_var(&gap_u) {
            Trigger::VarU
        } else if tests.significant_var(&gap_v) {
            Trigger::VarV
        } else if tests.significant(&zeros_u) {
            Trigger::LabelU
        } else if tests.significant(&ones_v) {
            Trigger::LabelV
        } else {
            continue;
        };
        let next = match trigger {
            Trigger::VarU | Trigger::LabelU => state.keep_upper(u),
            _ => state.keep_lower(v),
        };
        return Ok((next, record(n, trigger)));
    }
}

/// Learns `θ*` to precision `cfg.epsilon` with confidence `1 - cfg.delta / 2`
/// (when it finishes within the query budget).
pub fn run_threshold_learner<L: Labeler, R: Rng + ?Sized>(
    labeler: &L,
    cfg: &LearnerConfig,
    rng: &mut R,
) -> Result<ThresholdResult> {
    cfg.validate()?;
    if labeler.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: labeler.dim(),
        });
    }
    let rounds = num_rounds(cfg.epsilon)?;
    let per_check_delta = cfg.per_check_delta()?;
    let mut state = IntervalState::unit();
    let mut records = Vec::with_capacity(rounds as usize);
    let mut total = 0u64;
    for _ in 0..rounds {
        let (next, record) = run_round(&state, labeler, per_check_delta, cfg, cfg.max_queries - total, rng)?;
        total += record.queries_used;
        records.push(record);
        if record.trigger == Trigger::Budget {
            return Ok(ThresholdResult {
                theta_hat: state.midpoint(),
                total_queries: total,
                rounds: records,
                stop_reason: StopReason::BudgetExhausted,
            });
        }
        state = next;
    }
    Ok(ThresholdResult {
        theta_hat: state.midpoint(),
        total_queries: total,
        rounds: records,
        stop_reason: StopReason::Completed,
    })
}
