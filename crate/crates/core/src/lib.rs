//! Peak-hour series forecasting.
//!
//! Forecasts the daily maximum of each channel of an hourly series. The
//! pipeline normalizes each hour-of-day phase of the input window
//! ([`cyclicnorm`]), runs a differentiable forecaster ([`models`]) built on a
//! small reverse-mode engine ([`grad`]), denormalizes with learnable shifted
//! statistics, and max-pools the forecast into daily peaks so that a hybrid
//! sequence/peak loss can train the whole stack ([`pipeline`]).
//! [`train`] holds the optimizer loop, metrics, checkpoints, and the
//! experiment harness.

pub mod config;
pub mod cyclicnorm;
pub mod data;
pub mod error;
pub mod grad;
pub mod models;
pub mod pipeline;
pub mod train;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Matrix;
