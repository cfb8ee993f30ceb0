//! Command-line front end for `btc-core`: layered configuration, run
//! dispatch and CSV/manifest output.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{parse_config, RunConfig};
pub use error::{Category, CliError};
pub use run::{run, RunReport};
