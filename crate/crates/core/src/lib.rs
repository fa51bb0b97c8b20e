//! Causal machine learning toolkit for the demand effects of ticket discounts.
//!
//! The pipeline estimates how a continuous discount rate shifts demand among
//! *always buyers*, the customers who would have bought the same ticket
//! without any discount. Within that principal stratum the purchase decision
//! does not react to the discount, so conditioning on the survey (buyers only)
//! does not open a collider path.
//!
//! Modules:
//!
//! - [`data`]: survey records, CSV ingestion, section aggregation, sample rules.
//! - [`forest`]: random forests for regression and classification.
//! - [`causal_forest`]: orthogonalized honest causal forest (CAPE / APE).
//! - [`dml`]: cross-fitted doubly robust ATE for the binarized discount.
//! - [`benchmarks`]: OLS, probit and propensity-score matching.
//! - [`diagnostics`]: monotonicity and independence tests, BLP heterogeneity.
//! - [`simulator`]: data-generating process with known ground truth.
//! - [`cli`]: batch commands and report files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod causal_forest;
pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod dml;
pub mod error;
pub mod forest;
pub mod matrix;
pub mod report;
pub mod rng;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use matrix::Matrix;
