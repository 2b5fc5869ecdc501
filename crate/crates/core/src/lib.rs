//! Volatility modelling and large-loss prediction toolkit: market-data
//! preparation, standardized error laws, GARCH-family filters with exogenous
//! news regressors, maximum-likelihood estimation, rolling VaR forecasts and
//! backtests, model-confidence-set selection under an asymmetric quantile
//! loss, dynamic VaR combination, and sentiment-regressor construction from
//! headlines.

pub mod backtest;
pub mod combine;
pub mod dist;
pub mod error;
pub mod estimate;
pub mod forecast;
pub mod market;
pub mod mcs;
pub mod model;
pub mod optim;
pub mod sentiment;
pub mod special;

pub use error::{Error, Result};
