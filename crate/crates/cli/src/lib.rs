//! Command-line front end: configuration, dispatch and report emission.

pub mod batch;
pub mod config;
pub mod report;
pub mod run;

pub use config::{Cli, Command, Format, Globals, RunConfig};
pub use report::{Report, ReportError};
pub use run::dispatch;
