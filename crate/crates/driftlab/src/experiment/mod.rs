//! Experiment orchestration: configuration, sweep execution, CSV and SVG
//! artifacts, the run manifest, and the numeric verification harness.
//!
//! The submodules separate policy from mechanics:
//!
//! * [`config`]: what to run (grids, replication counts, seeds, output).
//! * [`runner`]: threshold cache, power cells, reports, resumability.
//! * [`figures`] and [`svg`]: deterministic plots of the reports.
//! * [`verify`]: machine-checkable invariants written to JSON.
//! * [`manifest`] and [`csvio`]: artifact bookkeeping and fixed-schema
//!   CSV parsing and formatting.

pub mod config;
pub mod csvio;
pub mod figures;
pub mod manifest;
pub mod runner;
pub mod svg;
pub mod verify;

pub use config::{ExperimentConfig, ProvenanceChoice, DEFAULT_MASTER_SEED};
pub use manifest::RunManifest;
pub use runner::{
    run_calibrate, run_collapse, run_delta_min, run_power, run_table, OutPaths,
};
pub use verify::{run_verify, VerificationReport};
