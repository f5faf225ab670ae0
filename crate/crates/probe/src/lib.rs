//! IO, model transports, commands and reports around [`ipt_core`].
//!
//! * [`dataset`]: the on-disk dataset layout (manifest plus PNG frames).
//! * [`config`]: the experiment configuration document.
//! * [`protocol`]: the model wire protocol over TCP or a child process.
//! * [`mock_server`]: the built-in mock model as a protocol server.
//! * [`generate`], [`transform`], [`evaluate`], [`report`]: the commands.
//! * [`svg`]: the static plots used by reports.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod generate;
pub mod mock_server;
pub mod output;
pub mod protocol;
pub mod report;
pub mod svg;
pub mod transform;

pub use error::{Error, Result};
