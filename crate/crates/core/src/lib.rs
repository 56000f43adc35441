//! Dense randomized measurement of sparse signals.
//!
//! The pipeline: a K-sparse length-n signal is observed through R rounds of
//! Bernoulli-masked inner products (optionally composed with an orthonormal
//! transform), and recovered by equality-constrained L1 minimization (basis
//! pursuit). Alongside the pipeline live the round-count calculators, the
//! restricted-isometry and concentration analysis tools, and a Monte Carlo
//! harness that traces success probability as a function of the number of
//! measurement rounds.

pub mod analysis;
pub mod basis;
pub mod error;
pub mod experiments;
pub mod measurement;
pub mod model;
pub mod recovery;
pub mod seed;

pub use error::{Error, Result};
pub use model::{
    BernoulliMask, MaskMode, MeasurementEnsemble, OrthonormalBasis, RecoveryResult, SparseSignal,
    SuccessCurve, ValueDist,
};
