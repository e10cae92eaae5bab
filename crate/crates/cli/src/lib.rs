//! Library surface of the experiment runner; the `pvlab` binary is a thin
//! wrapper around these modules.

pub mod config;
pub mod experiments;
pub mod report;
