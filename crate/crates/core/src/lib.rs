//! Active learning of one-dimensional thresholds and smooth decision
//! boundaries from a labeler that may flip labels or abstain.
//!
//! The crate is organised bottom-up:
//!
//! * [`anytime_tests`]: always-valid sequential significance tests and the
//!   Monte Carlo calibration of their constants.
//! * [`labelers`]: synthetic labeler oracles with abstention and label noise,
//!   plus grid verifiers for the monotonicity / non-flatness conditions.
//! * [`threshold_learner`]: the quartile binary search that combines
//!   abstention-rate and label tests.
//! * [`boundary_learner`]: per-grid-line threshold learning followed by
//!   piecewise tensor-product Lagrange interpolation.
//! * [`harness`]: seeded experiment campaigns, log-log scaling fits and
//!   JSON/CSV reports used by the `abstain` CLI.

pub mod boundary_learner;
pub mod error;
pub mod harness;
pub mod labelers;
pub mod rng;
pub mod threshold_learner;

pub use error::{Error, Result};
