//! Analytical engine for the successful edge computing probability of
//! multi-tier, multi-user-type MEC-enabled heterogeneous networks.
//!
//! Everything here is `no_std` + `alloc`. File formats, the simulator driver
//! and the command line live in the `mec-hetnet` companion crate.

#![no_std]
// `!(x > 0.0)` also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod comms;
pub mod config;
pub mod error;
pub mod geometry;
pub mod laplace;
pub mod optimizer;
pub mod quad;
pub mod queueing;
pub mod specfun;

pub use error::{MecError, Result};
