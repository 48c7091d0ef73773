//! Event-driven alpha from social-media posts.
//!
//! Tweets are aligned to trading days, annotated with a tone score and a set
//! of event labels, aggregated into a (ticker, day, label) exposure panel and
//! evaluated with event studies and quantile portfolio sorts.

pub mod annotation;
pub mod backtest;
pub mod domain;
pub mod error;
pub mod factor;
pub mod ingestion;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
