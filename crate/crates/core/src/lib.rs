//! Numerical laboratory for sharp Hardy and Hardy–Sobolev constants with a
//! boundary singularity.

pub mod certificates;
pub mod conformal;
pub mod error;
pub mod femlab;
pub mod potentials;
pub mod quad;
pub mod special;
pub mod speclog;
pub mod sturm1d;
pub mod types;

pub use error::{LabError, Result};
pub use types::{EigenEstimate, Params, PointN, SeriesValue, TraceEntry};

/// Version of the numerical core, recorded in CLI report provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
