//! File formats, persistence and the command-line pipeline around
//! [`insectsound_core`].

pub mod commands;
pub mod config;
pub mod dataset_io;
mod error;
pub mod fixture;
pub mod lock;
pub mod manifest;
pub mod model_io;
pub mod report;
pub mod store;
pub mod wav;

pub use error::{Error, Result};
pub use insectsound_core as core;
