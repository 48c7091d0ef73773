//! Core vocabulary: tickers, trading dates, tweets, price bars, event labels,
//! annotations and holding horizons.
//!
//! Every type here is an immutable value. Constructors validate, so holding a
//! `Ticker` or `Tweet` means its invariants already hold.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exchange symbol, normalized to uppercase ASCII, 1 to 10 characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ticker(String);

impl Ticker {
    pub const MAX_LEN: usize = 10;

    pub fn new(symbol: &str) -> Option<Self> {
        let symbol = symbol.trim();
        if symbol.is_empty()
            || symbol.len() > Self::MAX_LEN
            || !symbol.bytes().all(|b| b.is_ascii_graphic())
        {
            return None;
        }
        Some(Ticker(symbol.to_ascii_uppercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Ticker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Ticker {
    type Error = String;

    fn try_from(value: String) -> std::result::Result<Self, Self::Error> {
        Ticker::new(&value).ok_or_else(|| format!("invalid ticker {value:?}"))
    }
}

impl From<Ticker> for String {
    fn from(t: Ticker) -> String {
        t.0
    }
}

/// Calendar date without time zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TradingDate(NaiveDate);

impl TradingDate {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(TradingDate)
    }

    pub fn naive(self) -> NaiveDate {
        self.0
    }

    pub fn of_instant(ts: &DateTime<Utc>) -> Self {
        TradingDate(ts.date_naive())
    }
}

impl From<NaiveDate> for TradingDate {
    fn from(d: NaiveDate) -> Self {
        TradingDate(d)
    }
}

impl FromStr for TradingDate {
    type Err = chrono::ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").map(TradingDate)
    }
}

impl fmt::Display for TradingDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

/// One validated corpus record.
#[derive(Debug, Clone, PartialEq)]
pub struct Tweet {
    pub id: String,
    pub timestamp: DateTime<Utc>,
    pub ticker: Ticker,
    pub text: String,
}

impl Tweet {
    /// Canonical timestamp rendering (`Z` suffix, seconds precision unless
    /// the instant carries sub-second digits).
    pub fn timestamp_string(&self) -> String {
        self.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true)
    }
}

/// A corpus record as it comes off disk, before validation.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct RawTweet {
    pub id: Option<String>,
    pub timestamp: Option<String>,
    pub ticker: Option<String>,
    pub text: Option<String>,
}

pub fn parse_timestamp(value: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(value.trim())
        .ok()
        .map(|dt| dt.with_timezone(&Utc))
}

/// Validate one raw record. `line` is the 1-based file line used in errors.
pub fn validate_tweet(raw: &RawTweet, line: usize) -> Result<Tweet> {
    fn present<'a>(v: &'a Option<String>, field: &'static str, line: usize) -> Result<&'a str> {
        match v.as_deref() {
            Some(s) => Ok(s),
            None => Err(Error::MissingField { field, line }),
        }
    }
    let id = present(&raw.id, "id", line)?.trim();
    if id.is_empty() {
        return Err(Error::MissingField { field: "id", line });
    }
    let ts = present(&raw.timestamp, "timestamp", line)?;
    let ticker = present(&raw.ticker, "ticker", line)?;
    let text = present(&raw.text, "text", line)?;

    let timestamp = parse_timestamp(ts).ok_or_else(|| Error::BadTimestamp {
        value: ts.to_string(),
        line,
    })?;
    let ticker = Ticker::new(ticker).ok_or_else(|| Error::InvalidTicker {
        value: ticker.to_string(),
        line,
    })?;
    if text.trim().is_empty() {
        return Err(Error::EmptyText { line });
    }
    Ok(Tweet {
        id: id.to_string(),
        timestamp,
        ticker,
        text: text.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceBar {
    pub date: TradingDate,
    pub close: f64,
}

/// Date-ordered closes for a single ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    ticker: Ticker,
    bars: Vec<PriceBar>,
}

impl PriceSeries {
    pub fn ticker(&self) -> &Ticker {
        &self.ticker
    }

    pub fn bars(&self) -> &[PriceBar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    /// Row index of `date`, if it is a trading row of this series.
    pub fn position(&self, date: TradingDate) -> Option<usize> {
        self.bars.binary_search_by(|b| b.date.cmp(&date)).ok()
    }

    /// Multiply every close by `factor`; used for scale-invariance checks.
    pub fn scaled(&self, factor: f64) -> PriceSeries {
        PriceSeries {
            ticker: self.ticker.clone(),
            bars: self
                .bars
                .iter()
                .map(|b| PriceBar {
                    date: b.date,
                    close: b.close * factor,
                })
                .collect(),
        }
    }
}

/// Sort bars ascending by date, rejecting duplicate dates and non-positive
/// or non-finite closes.
pub fn validate_price_series(ticker: Ticker, mut bars: Vec<PriceBar>) -> Result<PriceSeries> {
    for b in &bars {
        if !(b.close > 0.0 && b.close.is_finite()) {
            return Err(Error::NonPositivePrice {
                ticker,
                date: b.date,
                close: b.close,
            });
        }
    }
    bars.sort_by_key(|b| b.date);
    if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(Error::DuplicateDate {
            ticker,
            date: w[0].date,
        });
    }
    Ok(PriceSeries { ticker, bars })
}

/// Event tag drawn from a [`Taxonomy`]. Obtain one via [`Taxonomy::label`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct EventLabel(String);

impl EventLabel {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Separator used when a label set is written into a single CSV field.
pub const LABEL_SEPARATOR: char = '|';

/// The set of admissible event labels, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    labels: Vec<EventLabel>,
    index: HashSet<String>,
}

impl Taxonomy {
    /// The seven labels that ship as the default taxonomy file.
    pub const DEFAULT_LABELS: [&'static str; 7] = [
        "Social Media Backlash",
        "Negative Press",
        "Viral Marketing Campaign",
        "Brand Boycott",
        "Speculation/Rumor",
        "Retail Investor Buzz",
        "Geopolitical Tension",
    ];

    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut labels = Vec::new();
        let mut index = HashSet::new();
        for name in names {
            let name = name.as_ref().trim();
            if name.contains(LABEL_SEPARATOR) {
                return Err(Error::ConfigInvalid(format!(
                    "label {name:?} contains the reserved separator {LABEL_SEPARATOR:?}"
                )));
            }
            if !name.is_empty() && index.insert(name.to_string()) {
                labels.push(EventLabel(name.to_string()));
            }
        }
        if labels.is_empty() {
            return Err(Error::EmptyTaxonomy);
        }
        Ok(Taxonomy { labels, index })
    }

    pub fn default_labels() -> Self {
        Self::new(Self::DEFAULT_LABELS).expect("default taxonomy is non-empty")
    }

    /// Parse taxonomy text: one label per line, `#` comments, blanks ignored.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(|l| l.trim())
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.labels {
            out.push_str(l.as_str());
            out.push('\n');
        }
        out
    }

    pub fn label(&self, name: &str) -> Result<EventLabel> {
        self.get(name)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Option<EventLabel> {
        self.index
            .contains(name)
            .then(|| EventLabel(name.to_string()))
    }

    pub fn contains(&self, label: &EventLabel) -> bool {
        self.index.contains(label.as_str())
    }

    pub fn labels(&self) -> &[EventLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Net tone plus event tags for one tweet.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub tweet_id: String,
    tone: f64,
    pub labels: BTreeSet<EventLabel>,
}

impl Annotation {
    /// Non-finite tones become 0; finite tones are clamped to `[-1, 1]`.
    pub fn new(
        tweet_id: impl Into<String>,
        tone: f64,
        labels: impl IntoIterator<Item = EventLabel>,
    ) -> Self {
        Annotation {
            tweet_id: tweet_id.into(),
            tone: clamp_tone(tone),
            labels: labels.into_iter().collect(),
        }
    }

    pub fn tone(&self) -> f64 {
        self.tone
    }
}

pub fn clamp_tone(tone: f64) -> f64 {
    if tone.is_finite() {
        tone.clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Holding period in trading rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Horizon(u32);

impl Horizon {
    pub const DEFAULTS: [Horizon; 4] = [Horizon(1), Horizon(2), Horizon(3), Horizon(7)];

    pub fn new(days: u32) -> Result<Self> {
        if days == 0 {
            Err(Error::InvalidHorizon)
        } else {
            Ok(Horizon(days))
        }
    }

    pub fn days(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for Horizon {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        Horizon::new(v)
    }
}

impl From<Horizon> for u32 {
    fn from(h: Horizon) -> u32 {
        h.0
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}d", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(id: &str, ts: &str, ticker: &str, text: &str) -> RawTweet {
        RawTweet {
            id: Some(id.into()),
            timestamp: Some(ts.into()),
            ticker: Some(ticker.into()),
            text: Some(text.into()),
        }
    }

    #[test]
    fn tweet_ticker_is_uppercased() {
        let t = validate_tweet(&raw("t1", "2017-03-01T14:00:00Z", "aapl", "buy"), 2).unwrap();
        assert_eq!(t.ticker.as_str(), "AAPL");
        assert_eq!(t.timestamp_string(), "2017-03-01T14:00:00Z");
    }

    #[test]
    fn whitespace_text_is_rejected() {
        let err = validate_tweet(&raw("t2", "2017-03-01T14:00:00Z", "AAPL", "   "), 3).unwrap_err();
        assert!(matches!(err, Error::EmptyText { line: 3 }));
    }

    #[test]
    fn bad_timestamp_is_rejected() {
        let err = validate_tweet(&raw("t3", "not-a-time", "AAPL", "x"), 4).unwrap_err();
        match err {
            Error::BadTimestamp { value, line } => {
                assert_eq!(value, "not-a-time");
                assert_eq!(line, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_field_names_the_field() {
        let mut r = raw("t4", "2017-03-01T14:00:00Z", "AAPL", "x");
        r.ticker = None;
        let err = validate_tweet(&r, 7).unwrap_err();
        assert!(matches!(err, Error::MissingField { field: "ticker", line: 7 }));
    }

    #[test]
    fn offset_timestamps_convert_to_utc() {
        let t = validate_tweet(&raw("t5", "2017-03-01T20:30:00-05:00", "MSFT", "x"), 2).unwrap();
        assert_eq!(t.timestamp_string(), "2017-03-02T01:30:00Z");
    }

    #[test]
    fn ticker_rules() {
        assert!(Ticker::new("").is_none());
        assert!(Ticker::new("BRK B").is_none());
        assert!(Ticker::new("ABCDEFGHIJK").is_none());
        assert!(Ticker::new("ÄPL").is_none());
        assert_eq!(Ticker::new("brk.b").unwrap().as_str(), "BRK.B");
    }

    fn d(day: u32) -> TradingDate {
        TradingDate::from_ymd(2017, 3, day).unwrap()
    }

    fn aapl() -> Ticker {
        Ticker::new("AAPL").unwrap()
    }

    #[test]
    fn price_series_valid() {
        let s = validate_price_series(
            aapl(),
            vec![
                PriceBar { date: d(2), close: 101.0 },
                PriceBar { date: d(1), close: 100.0 },
            ],
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.bars()[0].date, d(1));
    }

    #[test]
    fn price_series_duplicate_date() {
        let err = validate_price_series(
            aapl(),
            vec![
                PriceBar { date: d(1), close: 100.0 },
                PriceBar { date: d(1), close: 101.0 },
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateDate { .. }));
    }

    #[test]
    fn price_series_zero_close() {
        let err =
            validate_price_series(aapl(), vec![PriceBar { date: d(1), close: 0.0 }]).unwrap_err();
        assert!(matches!(err, Error::NonPositivePrice { .. }));
    }

    #[test]
    fn taxonomy_file_format() {
        let tax = Taxonomy::parse("# labels\nBrand Boycott\n\n  Negative Press \n# end\n").unwrap();
        assert_eq!(tax.len(), 2);
        assert_eq!(tax.labels()[1].as_str(), "Negative Press");
        assert!(tax.label("Alien Invasion").is_err());
        assert!(matches!(Taxonomy::parse("# only\n"), Err(Error::EmptyTaxonomy)));
    }

    #[test]
    fn annotation_clamps_tone_and_dedups() {
        let tax = Taxonomy::default_labels();
        let l = tax.label("Brand Boycott").unwrap();
        let a = Annotation::new("x", 3.0, [l.clone(), l]);
        assert_eq!(a.tone(), 1.0);
        assert_eq!(a.labels.len(), 1);
        assert_eq!(Annotation::new("y", f64::NAN, []).tone(), 0.0);
    }

    #[test]
    fn horizon_rejects_zero() {
        assert!(Horizon::new(0).is_err());
        assert_eq!(Horizon::DEFAULTS.map(|h| h.days()), [1, 2, 3, 7]);
    }

    proptest! {
        #[test]
        fn ticker_order_is_total_and_consistent(a in "[A-Z]{1,10}", b in "[A-Z]{1,10}", c in "[A-Z]{1,10}") {
            let (a, b, c) = (Ticker::new(&a).unwrap(), Ticker::new(&b).unwrap(), Ticker::new(&c).unwrap());
            prop_assert_eq!(a.cmp(&b) == std::cmp::Ordering::Equal, a == b);
            prop_assert_eq!(a.cmp(&b), b.cmp(&a).reverse());
            if a <= b && b <= c {
                prop_assert!(a <= c);
            }
        }

        #[test]
        fn date_order_is_total_and_round_trips(x in 0i64..40_000, y in 0i64..40_000) {
            let base = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap();
            let a = TradingDate::from(base + chrono::Duration::days(x));
            let b = TradingDate::from(base + chrono::Duration::days(y));
            prop_assert_eq!(a.cmp(&b), x.cmp(&y));
            prop_assert_eq!(a.to_string().parse::<TradingDate>().unwrap(), a);
        }
    }
}
