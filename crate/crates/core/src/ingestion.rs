//! Corpus and price loading, tweet-to-day alignment, and log returns.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use chrono::{Duration, Timelike};
use csv::StringRecord;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_price_series, validate_tweet, Horizon, PriceBar, PriceSeries, RawTweet, Ticker,
    TradingDate, Tweet,
};
use crate::error::{Error, Result};

/// How invalid corpus rows are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadMode {
    /// Any invalid row aborts the load.
    #[default]
    Strict,
    /// Invalid rows are dropped and counted.
    Lenient,
}

#[derive(Debug, Clone)]
pub struct TweetLoad {
    pub tweets: Vec<Tweet>,
    pub dropped: usize,
}

pub type PriceMap = BTreeMap<Ticker, PriceSeries>;

fn column(headers: &StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(file))
}

/// Load a tweet corpus CSV with header `id,timestamp,ticker,text`.
pub fn load_tweets(path: &Path, mode: LoadMode) -> Result<TweetLoad> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let cols = [
        column(&headers, "id"),
        column(&headers, "timestamp"),
        column(&headers, "ticker"),
        column(&headers, "text"),
    ];

    let mut tweets = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashSet::new();
    let mut record = StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(Error::csv(path, e)),
        }
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |i: Option<usize>| i.and_then(|i| record.get(i)).map(str::to_string);
        let raw = RawTweet {
            id: get(cols[0]),
            timestamp: get(cols[1]),
            ticker: get(cols[2]),
            text: get(cols[3]),
        };
        let result = validate_tweet(&raw, line).and_then(|t| {
            if seen.insert(t.id.clone()) {
                Ok(t)
            } else {
                Err(Error::DuplicateTweetId { id: t.id, line })
            }
        });
        match result {
            Ok(t) => tweets.push(t),
            Err(e) => errors.push(e),
        }
    }

    if !errors.is_empty() && mode == LoadMode::Strict {
        return Err(Error::InvalidRecords {
            path: path.to_path_buf(),
            errors,
        });
    }
    let dropped = errors.len();
    if dropped > 0 {
        tracing::warn!(dropped, path = %path.display(), "dropped invalid tweet rows");
    }
    Ok(TweetLoad { tweets, dropped })
}

pub fn write_tweets<W: Write>(out: W, tweets: &[Tweet]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::csv("<tweets>", e);
    w.write_record(["id", "timestamp", "ticker", "text"]).map_err(wrap)?;
    for t in tweets {
        w.write_record([
            t.id.as_str(),
            t.timestamp_string().as_str(),
            t.ticker.as_str(),
            t.text.as_str(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<tweets>", e))
}

/// Load a price CSV with header `date,ticker,close[,volume]`.
pub fn load_prices(path: &Path) -> Result<PriceMap> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let missing = |field| Error::MissingField { field, line: 1 };
    let c_date = column(&headers, "date").ok_or_else(|| missing("date"))?;
    let c_ticker = column(&headers, "ticker").ok_or_else(|| missing("ticker"))?;
    let c_close = column(&headers, "close").ok_or_else(|| missing("close"))?;

    let mut grouped: BTreeMap<Ticker, Vec<PriceBar>> = BTreeMap::new();
    let mut record = StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(Error::csv(path, e)),
        }
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize, name: &'static str| {
            record
                .get(i)
                .map(str::trim)
                .ok_or(Error::MissingField { field: name, line })
        };
        let date_s = field(c_date, "date")?;
        let date: TradingDate = date_s.parse().map_err(|_| Error::InvalidDate {
            value: date_s.to_string(),
            line,
        })?;
        let ticker_s = field(c_ticker, "ticker")?;
        let ticker = Ticker::new(ticker_s).ok_or_else(|| Error::InvalidTicker {
            value: ticker_s.to_string(),
            line,
        })?;
        let close_s = field(c_close, "close")?;
        let close: f64 = close_s.parse().map_err(|_| Error::BadField {
            field: "close",
            value: close_s.to_string(),
            line,
        })?;
        grouped.entry(ticker).or_default().push(PriceBar { date, close });
    }

    grouped
        .into_iter()
        .map(|(t, bars)| validate_price_series(t.clone(), bars).map(|s| (t, s)))
        .collect()
}

/// Write prices sorted by (ticker, date) with header `date,ticker,close`.
pub fn write_prices<W: Write>(out: W, prices: &PriceMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::csv("<prices>", e);
    w.write_record(["date", "ticker", "close"]).map_err(wrap)?;
    for (ticker, series) in prices {
        for bar in series.bars() {
            w.write_record([
                bar.date.to_string(),
                ticker.to_string(),
                bar.close.to_string(),
            ])
            .map_err(wrap)?;
        }
    }
    w.flush().map_err(|e| Error::io("<prices>", e))
}

/// Daily log returns for one ticker; the first price date has no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub ticker: Ticker,
    pub entries: Vec<(TradingDate, f64)>,
}

pub fn compute_log_returns(series: &PriceSeries) -> Result<ReturnSeries> {
    if series.len() < 2 {
        return Err(Error::SeriesTooShort {
            ticker: series.ticker().clone(),
            len: series.len(),
        });
    }
    let entries = series
        .bars()
        .windows(2)
        .map(|w| (w[1].date, (w[1].close / w[0].close).ln()))
        .collect();
    Ok(ReturnSeries {
        ticker: series.ticker().clone(),
        entries,
    })
}

/// Log returns for every ticker with at least two bars, in ticker order.
/// The second element counts tickers skipped for being too short.
pub fn compute_all_returns(prices: &PriceMap) -> (Vec<ReturnSeries>, usize) {
    let results: Vec<_> = prices
        .values()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|s| compute_log_returns(s))
        .collect();
    let total = results.len();
    let ok: Vec<_> = results.into_iter().filter_map(|r| r.ok()).collect();
    let skipped = total - ok.len();
    (ok, skipped)
}

pub fn write_returns<W: Write>(out: W, returns: &[ReturnSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::csv("<returns>", e);
    w.write_record(["ticker", "date", "log_return"]).map_err(wrap)?;
    for rs in returns {
        for (date, r) in &rs.entries {
            w.write_record([rs.ticker.to_string(), date.to_string(), r.to_string()])
                .map_err(wrap)?;
        }
    }
    w.flush().map_err(|e| Error::io("<returns>", e))
}

/// `ln(close[t+h] / close[t])`, counting `h` trading rows of the series.
/// `None` when fewer than `h` rows follow `t`.
pub fn forward_return(series: &PriceSeries, date: TradingDate, h: Horizon) -> Result<Option<f64>> {
    let i = series.position(date).ok_or_else(|| Error::DateNotFound {
        ticker: series.ticker().clone(),
        date,
    })?;
    Ok(forward_return_at(series, i, h))
}

pub(crate) fn forward_return_at(series: &PriceSeries, row: usize, h: Horizon) -> Option<f64> {
    let bars = series.bars();
    let j = row + h.days() as usize;
    (j < bars.len()).then(|| (bars[j].close / bars[row].close).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedTweet {
    pub tweet: Tweet,
    pub trading_date: TradingDate,
}

/// Hour of day (UTC) from which tweets roll over to the next calendar day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DayCutoff(pub Option<u32>);

impl DayCutoff {
    pub fn date_of(self, tweet: &Tweet) -> TradingDate {
        match self.0 {
            Some(hour) if tweet.timestamp.hour() >= hour => {
                TradingDate::of_instant(&(tweet.timestamp + Duration::days(1)))
            }
            _ => TradingDate::of_instant(&tweet.timestamp),
        }
    }
}

/// Map each tweet to the UTC calendar date of its timestamp.
pub fn align_tweets(tweets: &[Tweet]) -> Vec<AlignedTweet> {
    align_tweets_with_cutoff(tweets, DayCutoff::default())
}

pub fn align_tweets_with_cutoff(tweets: &[Tweet], cutoff: DayCutoff) -> Vec<AlignedTweet> {
    tweets
        .iter()
        .map(|t| AlignedTweet {
            trading_date: cutoff.date_of(t),
            tweet: t.clone(),
        })
        .collect()
}

/// Read back the `id,trading_date` alignment file.
pub fn read_alignment(path: &Path) -> Result<BTreeMap<String, TradingDate>> {
    let mut rdr = csv_reader(path)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = rec.get(0).ok_or(Error::MissingField { field: "id", line })?;
        let d = rec.get(1).ok_or(Error::MissingField {
            field: "trading_date",
            line,
        })?;
        let date = d.parse().map_err(|_| Error::InvalidDate {
            value: d.to_string(),
            line,
        })?;
        out.insert(id.to_string(), date);
    }
    Ok(out)
}

pub fn write_alignment<W: Write>(out: W, aligned: &[AlignedTweet]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::csv("<alignment>", e);
    w.write_record(["id", "trading_date"]).map_err(wrap)?;
    for a in aligned {
        w.write_record([a.tweet.id.clone(), a.trading_date.to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<alignment>", e))
}
