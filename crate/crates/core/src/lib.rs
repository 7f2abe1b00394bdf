//! Few-shot tabular binary classification with informative priors.
//!
//! This crate trains and evaluates logistic-regression-family classifiers that
//! fold in prior knowledge elicited from a language model (or a domain expert):
//!
//! - **Ordinal encodings**: categorical columns are mapped to integers in a
//!   ranked order instead of an arbitrary one, then standardized ([`data`]).
//! - **BiasedLR**: logistic regression whose weights are penalized toward a
//!   per-column correlation-sign vector ([`models`]).
//! - **MonotonicLR**: logistic regression applied to per-column learned
//!   monotone maps, built from positivity-constrained scalar networks
//!   integrated with Gauss–Legendre quadrature ([`umnn`]), regularized through
//!   average effective gradients ([`models`]).
//!
//! The [`eval`] module reproduces the few-shot protocol (shot ladder × seeds ×
//! encodings × methods, ROC-AUC aggregation) and [`analyze`] extracts
//! per-column activation curves, category marginals, and monotonicity flags
//! from fitted models.

pub mod analyze;
pub mod data;
pub mod error;
pub mod eval;
pub mod models;
pub mod priors;
pub mod umnn;

pub use error::{Error, Result};
