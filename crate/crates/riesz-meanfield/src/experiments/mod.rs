//! Regime validation and experiment orchestration.
//!
//! A regime is described by a flat `key = value` configuration
//! ([`RegimeSpec`]); [`validate_regime`] checks it against the admissibility
//! gates of the convergence theorems and assembles a [`GateReport`].
//! [`run_experiment`] executes one of the seven experiment [`Kind`]s into a
//! content-addressed run directory with CSV samples, JSON reports, raw
//! checkpoint arrays, and a reproducibility manifest.

pub mod config;
pub mod persist;
pub mod run;

pub use config::{report_text, validate_regime, GateReport, RegimeSpec};
pub use persist::{sha256_file, sha256_hex, SampleRow};
pub use run::{run_experiment, ExperimentManifest, FileHash, Kind, RunContext, RunOutcome};
