//! Command-line pipeline around the `dynshape` library: phantom
//! generation, acquisition simulation, reconstruction, metrics, the DCT
//! compression study and frame export.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{run, Command};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
