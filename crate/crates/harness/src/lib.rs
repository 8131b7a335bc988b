//! Experiment orchestration: instance sweeps, model accuracy, policy
//! comparison, runtime benchmarking and result export.

pub mod accuracy;
pub mod bench;
pub mod compare;
pub mod error;
pub mod export;
pub mod metrics;
pub mod plan;
pub mod spec;

pub use error::{HarnessError, Result};
pub use spec::{ExperimentSpec, Policy};
