//! Configuration, file formats and command dispatch for `ghostbench`.

pub mod config;
pub mod pgm;
pub mod run;

pub use config::{parse_config, Command, ConfigError, RawConfig, RunConfig};
pub use run::{run, RunError};
