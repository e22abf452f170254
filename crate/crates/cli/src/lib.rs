//! Batch front end: JSON run configs in, CSV profiles and JSON reports out.
//!
//! Exit status follows [`exit_code`]: `0` when every check in the report
//! passed, `1` when a check failed, `2` on configuration or solver errors.

pub mod config;
pub mod error;
pub mod run;

pub use config::{GridKind, Mode, Overrides, RunConfig};
pub use error::{CliError, CliResult};
pub use run::{run, Outcome};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

pub fn exit_code(result: &CliResult<Outcome>) -> i32 {
    match result {
        Ok(o) if o.passed => EXIT_PASS,
        Ok(_) => EXIT_FAIL,
        Err(_) => EXIT_ERROR,
    }
}
