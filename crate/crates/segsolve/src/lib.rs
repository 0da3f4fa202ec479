//! Configuration, validation, file formats and run orchestration for the
//! `segsolve` command-line tool. The numerics live in `segsolve_core`.

pub mod config;
pub mod error;
pub mod format;
pub mod io;
pub mod run;
pub mod scenario;
pub mod validate;

pub use config::Config;
pub use error::CliError;
pub use run::{run, Command, Overrides};
pub use scenario::Scenario;
