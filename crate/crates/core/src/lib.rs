//! Simulation and verification toolkit for the step-reinforced random walk with
//! regularly varying memory.
//!
//! At step `n + 1` the walk either repeats a past step `X_k`, chosen with
//! probability proportional to the memory weight `mu_k` (this happens with
//! probability `p`), or draws a fresh innovation. The crate provides the memory
//! catalog, the deterministic scaling sequences, an incremental weighted sampler,
//! the simulator, exact moment recursions with an enumeration oracle, and the
//! statistical harness that turns Monte Carlo batches into verdicts.

pub mod cli;
pub mod error;
pub mod memory;
pub mod moments;
pub mod rng;
pub mod sampler;
pub mod scaling;
pub mod stats;
pub mod suites;
pub mod walk;

pub use error::{Error, Result};
pub use memory::{DeltaSpec, MemorySpec, ZetaSpec};
pub use moments::{EnumeratedMoments, MomentTable};
pub use sampler::DynamicWeightedIndex;
pub use scaling::{RegimeReport, SequenceTable};
pub use stats::ExperimentReport;
pub use walk::{InnovationSpec, WalkConfig, WalkTrajectory};

/// Version string recorded in manifests and reports.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
