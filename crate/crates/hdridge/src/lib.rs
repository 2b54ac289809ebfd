//! High-dimensional ridge-type prediction under block-diagonal covariance.
//!
//! The crate builds block-diagonal population covariance matrices, simulates
//! cohorts and traits under a linear polygenic model, fits the full family of
//! ridge-type estimators (marginal, whole-matrix ridge, block-wise ridge with
//! training/panel/testing covariance sources, and block-wise local principal
//! component estimators), and evaluates the random-matrix-theory predictions
//! of their out-of-sample accuracy so that Monte-Carlo runs can be compared
//! against theory.
//!
//! Modules:
//! - [`spectrum`]: block covariance construction and spectral laws
//! - [`datagen`]: seeded cohort / effect / trait generation
//! - [`estimators`]: coefficient estimators and per-block PC bases
//! - [`rmt`]: companion fixed points, trace functionals, accuracy formulas
//! - [`harness`]: replicated scenarios, empirical accuracy, aggregation
//! - [`presets`]: ready-made block configurations and scenarios

pub mod datagen;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod presets;
pub mod rmt;
pub mod spectrum;

pub use error::HdError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, HdError>;
