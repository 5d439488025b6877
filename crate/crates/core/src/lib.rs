//! Mean testing and center estimation from ε-truncated samples.
//!
//! The observer sees i.i.d. draws from the conditional law P(·|S) for an
//! unknown acceptance set S of mass at least 1 − ε. This crate provides:
//!
//! - samplable distribution families with exact population parameters
//!   ([`dist`]),
//! - truncation rules, rejection sampling, and adversarial truncation
//!   constructions ([`truncation`]),
//! - the bias-floor / effective-signal calculus ([`moments`]),
//! - the order-2 U-statistic test and its majority-vote amplification
//!   ([`ustat`]),
//! - the directional-median Chebyshev-center estimator and regularity test
//!   ([`median`]),
//! - exact brute-force oracles on small instances ([`oracle`]),
//! - a deterministic Monte Carlo experiment harness ([`harness`]).

pub mod dist;
pub mod error;
pub mod harness;
pub mod lp;
pub mod median;
pub mod moments;
pub mod oracle;
pub mod rng;
pub mod truncation;
pub mod ustat;

pub use dist::{DistributionSpec, Moment, SampleBatch};
pub use error::{Error, Result};
pub use rng::StreamRng;
pub use truncation::{AdversaryInstance, TruncationRule};
pub use ustat::TestVerdict;
