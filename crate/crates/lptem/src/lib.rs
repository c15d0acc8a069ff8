//! File formats, dataset layout and the `lptem` command-line tool built on
//! [`lptem_core`].

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fsutil;
pub mod pgm;
pub mod plot;
pub mod trajcsv;

pub use error::{CliError, Result};
