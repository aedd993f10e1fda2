//! Simulation runner, configuration, figure recipes and output formats for
//! the heterogeneous best-M feedback toolkit. The numerical kernels live in
//! `hetfb-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod runner;

pub use error::AppError;
