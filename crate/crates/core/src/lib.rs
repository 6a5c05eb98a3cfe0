//! Forecasting the future part of a business-process event log from its
//! history.
//!
//! The pipeline runs in five stages: ingest a raw log ([`eventlog`]),
//! order/sanitize/window it ([`preprocess`]), train a GRU encoder-decoder with
//! attention ([`neural`], [`training`]), roll the model forward to generate
//! future traces ([`predict`]), and compare predicted and actual logs through
//! their directly-follows matrices ([`dfg`]) against simple baselines
//! ([`baselines`]).

pub mod analysis;
pub mod baselines;
pub mod dfg;
pub mod error;
pub mod eventlog;
pub mod hypersearch;
pub mod neural;
pub mod pipeline;
pub mod predict;
pub mod preprocess;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
