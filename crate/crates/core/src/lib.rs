//! Catastrophe-bond coupon forecasting toolkit.
//!
//! The pipeline runs from tranche and climate files ([`dataset`]) through
//! lagged climate features and elastic-net selection ([`features`]), eight
//! regression algorithms with randomized-search cross-validation
//! ([`regressors`]), point and Monte Carlo predictive forecasts
//! ([`forecast`]), to Value-at-Risk backtests of those forecasts
//! ([`backtest`]). [`cli`] wires the stages into batch commands.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod backtest;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod features;
pub mod forecast;
pub mod regressors;
pub mod stats;

pub use error::{Error, Result};
