//! Library side of the `netrec` command: error mapping, policy files,
//! summary metrics and the parameter-sweep engine.

pub mod error;
pub mod metrics;
pub mod policy_io;
pub mod sweep;

pub use error::CliError;
