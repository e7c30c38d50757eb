//! Experiments, result records and the command-line driver for the BDRE
//! model in `bdre-core`.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod oracles;
pub mod parallel;
pub mod records;
pub mod verify;

pub use error::{LabError, LabResult};
