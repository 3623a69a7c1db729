//! β-sweep harness around `seglab-core`: configuration, sweeps with warm
//! or cold starts, persisted solutions, CSV/JSON/SVG reports, audits and
//! lemma checks.

pub mod audit;
pub mod centers;
pub mod config;
pub mod error;
pub mod lemmas;
pub mod persist;
pub mod report;
pub mod svg;
pub mod sweep;

pub use config::SweepConfig;
pub use error::{LabError, LabResult};
pub use sweep::{run_sweep, SweepReport, SweepRow};
