//! Front end for `hypoco-core`: run configuration files, the `HYPO1`
//! binary container, JSON/CSV reports and parallel parameter sweeps.

pub mod config;
pub mod container;
pub mod pipeline;
pub mod report;

pub use config::{parse_config, parse_config_str, parse_range, RunConfig};
pub use pipeline::{CliError, EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERICAL, EXIT_OK};
