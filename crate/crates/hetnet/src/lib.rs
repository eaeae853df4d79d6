//! File formats, Monte Carlo simulation, parallel sweeps and the command
//! line around `mec-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config_file;
pub mod error;
pub mod output;
pub mod runs;
pub mod sim;

pub use error::{HetnetError, Result};
