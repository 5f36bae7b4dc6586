//! Configuration, orchestration and reporting for the `joyce-hk` binary.

// `!(x > y)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod config;
pub mod error;
pub mod grid;
pub mod run;

pub use config::RunConfig;
pub use error::{CliError, ConfigError};
pub use run::{run_crosscheck, run_scan, run_verify, write_scan, CrosscheckReport, RunReport, ScanRow};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
