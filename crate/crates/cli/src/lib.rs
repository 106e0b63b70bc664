//! Experiment driver for witness-point-regularized kernel discrepancy
//! training: one subcommand per desk-scale experiment, flat-file configs
//! with documented precedence, deterministic seeding, and atomic CSV/SVG/
//! manifest export.
//!
//! Built as a library plus a thin binary so the integration tests can drive
//! the same code paths (config resolution, oracles, command bodies) that the
//! binary does.

pub mod commands;
pub mod config;
pub mod csvout;
pub mod errors;
pub mod manifest;
pub mod quadrature;
pub mod stability;
pub mod svg;

pub use errors::CliError;
