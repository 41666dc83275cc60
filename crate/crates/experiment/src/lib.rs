//! Linear classification on synthetic Gaussian data, run through the
//! supersample protocol and scored with zero-one losses.

pub mod config;
pub mod data;
pub mod error;
pub mod model;
pub mod protocol;
pub mod run;
pub mod svg;

pub use config::ExperimentConfig;
pub use error::{ExperimentError, Result};
pub use model::{train, LinearModel};
pub use protocol::run_protocol;
pub use run::{run_experiment, write_outputs, ExperimentRow, ExperimentRun, BOUND_COLUMNS};
