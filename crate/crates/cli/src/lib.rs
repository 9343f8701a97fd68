//! Run-file driven front end for `weingarten-core`.

pub mod commands;
pub mod config;
pub mod emit;
pub mod error;
pub mod runfile;

pub use commands::{execute, write_summary, Command, Invocation, RunSummary};
pub use error::CliError;
pub use runfile::{ParseError, RunFile};

/// Seed used by `verify` when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_241_014;
