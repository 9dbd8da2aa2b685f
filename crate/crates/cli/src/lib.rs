//! Command-line plumbing for `sobolev-wlab`: configuration layering,
//! command dispatch, canonical result records and plots.
//!
//! Exit codes: 0 pass, 1 failed verdict or exhausted search, 2 usage or
//! range error, 3 I/O error.

pub mod config;
pub mod error;
pub mod output;
pub mod record;
pub mod run;

pub use config::{resolve, Command, Format, RunConfig, KEYS, SEED_ENV};
pub use error::CliError;
pub use output::write_outputs;
pub use record::{ResultRecord, Verdict};
pub use run::{rerun, run_command, run_sweep};
