//! Crate-wide error type.

use std::path::PathBuf;

use crate::domain::{Horizon, Ticker, TradingDate};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: missing field `{field}`")]
    MissingField { field: &'static str, line: usize },

    #[error("line {line}: field `text` is empty")]
    EmptyText { line: usize },

    #[error("line {line}: field `timestamp` is not an ISO-8601 instant with offset: {value:?}")]
    BadTimestamp { value: String, line: usize },

    #[error("line {line}: invalid ticker {value:?}")]
    InvalidTicker { value: String, line: usize },

    #[error("line {line}: invalid date {value:?} (expected YYYY-MM-DD)")]
    InvalidDate { value: String, line: usize },

    #[error("line {line}: field `{field}` could not be parsed: {value:?}")]
    BadField {
        field: &'static str,
        value: String,
        line: usize,
    },

    #[error("line {line}: duplicate tweet id {id:?}")]
    DuplicateTweetId { id: String, line: usize },

    #[error("{} invalid record(s) in {}; first: {}", .errors.len(), .path.display(), .errors[0])]
    InvalidRecords { path: PathBuf, errors: Vec<Error> },

    #[error("duplicate price for {ticker} on {date}")]
    DuplicateDate { ticker: Ticker, date: TradingDate },

    #[error("non-positive close {close} for {ticker} on {date}")]
    NonPositivePrice {
        ticker: Ticker,
        date: TradingDate,
        close: f64,
    },

    #[error("price series mixes tickers {expected} and {found}")]
    MixedTickers { expected: Ticker, found: Ticker },

    #[error("price series for {ticker} has {len} bar(s); at least 2 required")]
    SeriesTooShort { ticker: Ticker, len: usize },

    #[error("{date} is not a trading date for {ticker}")]
    DateNotFound { ticker: Ticker, date: TradingDate },

    #[error("horizon must be at least one day")]
    InvalidHorizon,

    #[error("label {0:?} is not in the taxonomy")]
    UnknownLabel(String),

    #[error("keyword map references label {0:?} which is not in the taxonomy")]
    UnknownLabelInMap(String),

    #[error("taxonomy is empty")]
    EmptyTaxonomy,

    #[error("lexicon is empty")]
    EmptyLexicon,

    #[error("prompt template must contain `{0}` exactly once")]
    MissingPlaceholder(&'static str),

    #[error("malformed annotation response: {0}")]
    MalformedResponse(String),

    #[error("annotation service error: {0}")]
    Network(String),

    #[error("{}: line {line} of the annotation cache is corrupt", .path.display())]
    CorruptCache { path: PathBuf, line: usize },

    #[error("replay cache has no entry for tweet {tweet_id:?}")]
    UncachedTweet { tweet_id: String },

    #[error("label {label:?} has {n} sample(s) at {horizon}; at least 2 required")]
    InsufficientSamples {
        label: String,
        horizon: Horizon,
        n: usize,
    },

    #[error("{n} sample(s) given; at least {required} required")]
    TooFewSamples { n: usize, required: usize },

    #[error("sample standard deviation is zero")]
    ZeroVariance,

    #[error("all ranks are tied")]
    ZeroRankVariance,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("simple compounding needs returns above -100%; got {value} at position {index}")]
    SimpleModeReturnBelowNeg100Pct { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("missing stage output {} (run `{stage}` first)", .path.display())]
    MissingStageOutput { stage: &'static str, path: PathBuf },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", .path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Process exit code: 1 validation, 2 I/O, 3 upstream service.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Io { .. } | Error::MissingStageOutput { .. } => 2,
            Error::Csv { source, .. } if source.is_io_error() => 2,
            Error::Network(_) | Error::MalformedResponse(_) => 3,
            _ => 1,
        }
    }
}
