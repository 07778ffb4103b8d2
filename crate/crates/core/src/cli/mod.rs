//! Batch front end behind the `lindblad-hosc` binary.

mod config;
mod run;

pub use config::{load_sampled_force, parse_complex, parse_config, parse_initial, InitialState, Mode, OracleKind, RunConfig};
pub use run::{error_exit_code, initial_density, run, RunOutcome, RunStatus, COMPARISON_HEADER, TRAJECTORY_HEADER};

use std::path::Path;

use crate::error::{Error, Result};

/// Reads and parses a configuration file; relative paths inside it resolve
/// against the file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}
