//! Batch driver for the ngbv-core checks: configuration, verification
//! suites, file expansion and report formats.

#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod expand;
pub mod format;
pub mod suites;
