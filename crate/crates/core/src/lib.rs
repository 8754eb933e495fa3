//! Dense precision-matrix estimation for asset returns driven by hidden
//! factors.
//!
//! Each row of the precision matrix is recovered from a regression of one
//! asset on all the others, `α̃_j = B̂ (Y_{-j} B̂)⁺ y_j`. Choosing `B̂ = I`
//! gives the ridgeless (minimum-norm least squares) estimator; choosing the
//! leading eigenvectors of `Y_{-j}ᵀ Y_{-j} / n` gives principal component
//! regression with a fixed or data-driven number of components.
//!
//! Around the estimators the crate provides the population factor model
//! (ground truth and signal-to-noise diagnostics), a Monte-Carlo harness,
//! and a rolling-window portfolio backtester with transaction costs.

pub mod backtest;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod factor_model;
pub mod linalg;
pub mod output;
pub mod simulation;

pub use error::{Error, Result};
