//! Simulation laboratory for detecting mean-preserving drift inside
//! blocks of Bernoulli observations.
//!
//! A block of n independent bits has error probabilities
//! p_i = e0 + delta g(i/n) for a bounded, mean-zero shape g, so every
//! block keeps grand mean e0 while the error rate migrates within the
//! block. The detector is a normalized CUSUM range statistic
//!
//!   T_n = max_k |sum_{i<=k} (X_i - ebar)| / sqrt(n ebar (1 - ebar)),
//!
//! whose null law converges to the supremum of a Brownian bridge. The
//! crate provides the sampling model, the statistic, threshold
//! calibration (Monte Carlo and asymptotic), power curves and minimal
//! detectable drift estimation, small-n exact enumeration, and
//! information-theoretic bounds, plus a command line experiment driver.

pub mod calibration;
pub mod cusum;
pub mod error;
pub mod experiment;
pub mod model;
pub mod power;
pub mod profiles;
pub mod rng;
pub mod theory;

pub use calibration::{CalibratedThreshold, SizeEstimate, ThresholdProvenance};
pub use cusum::{CusumTrace, TestDecision};
pub use error::{Error, Result};
pub use model::{ModelParams, TrialBlock};
pub use profiles::DriftProfile;
