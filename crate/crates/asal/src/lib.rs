//! Host-side runner for `asal-core`: configuration, the sidecar embedding
//! client, parallel evaluation, checkpoints, image and CSV output, and the
//! `asal` subcommands.

pub mod backend;
pub mod cache;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod imageio;
pub mod parallel;
pub mod rundir;
pub mod sidecar;

pub use commands::RunOptions;
pub use config::{CommandKind, Preset, RunConfig};
pub use error::{AppError, Result};
