//! Configuration, end-to-end pipelines, sweeps and artifact persistence.

pub mod artifacts;
pub mod config;
pub mod oracle;
pub mod pipeline;
pub mod selftest;

pub use config::{Auto, AutoTag, ExperimentConfig, NamedOmega, OmegaSpec, UniformBins};
pub use pipeline::{analyze_samples, run_point, run_sweep, simulate_samples, PointAnalysis, PointResult, SweepEntry, SweepResult};
pub use selftest::{run_selftest, SelftestReport};
