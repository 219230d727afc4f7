//! Command-line front end for `reluplan-core`: instance files, potentials, planning and
//! benchmark reports.

pub mod bench;
pub mod clock;
pub mod commands;
pub mod error;
pub mod format;

pub use error::CliError;
