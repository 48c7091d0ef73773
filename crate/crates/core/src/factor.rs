//! Exposure panel: per (ticker, date, label) sums of tweet tone.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Annotation, EventLabel, Horizon, Taxonomy, Ticker, TradingDate};
use crate::error::{Error, Result};
use crate::ingestion::{forward_return_at, AlignedTweet, PriceMap};

/// How a multi-label tweet's tone is attributed to its labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributionMode {
    /// Full tone to every label.
    Duplicate,
    /// `tone / |labels|` to each label.
    #[default]
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PanelKey {
    pub ticker: Ticker,
    pub date: TradingDate,
    pub label: EventLabel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelCell {
    pub exposure: f64,
    pub tweet_count: usize,
}

impl PanelCell {
    /// Exposure per contributing tweet; diagnostics only.
    pub fn mean_exposure(&self) -> f64 {
        self.exposure / self.tweet_count as f64
    }
}

/// Immutable once built; iterates in (ticker, date, label) order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExposurePanel {
    cells: BTreeMap<PanelKey, PanelCell>,
}

impl ExposurePanel {
    pub fn iter(&self) -> impl Iterator<Item = (&PanelKey, &PanelCell)> {
        self.cells.iter()
    }

    pub fn get(&self, ticker: &Ticker, date: TradingDate, label: &EventLabel) -> Option<&PanelCell> {
        self.cells.get(&PanelKey {
            ticker: ticker.clone(),
            date,
            label: label.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn count_by_label(&self) -> BTreeMap<EventLabel, usize> {
        let mut out = BTreeMap::new();
        for k in self.cells.keys() {
            *out.entry(k.label.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Per date, each ticker's exposure summed over labels (or for one label).
    pub fn cross_sections(&self, label: Option<&EventLabel>) -> BTreeMap<TradingDate, BTreeMap<Ticker, f64>> {
        let mut out: BTreeMap<TradingDate, BTreeMap<Ticker, f64>> = BTreeMap::new();
        for (k, c) in &self.cells {
            if label.is_some_and(|l| l != &k.label) {
                continue;
            }
            *out.entry(k.date)
                .or_default()
                .entry(k.ticker.clone())
                .or_insert(0.0) += c.exposure;
        }
        out
    }

    /// Panel with every exposure passed through `f`; keys and counts kept.
    pub fn map_exposures(&self, mut f: impl FnMut(&PanelKey, f64) -> f64) -> ExposurePanel {
        ExposurePanel {
            cells: self
                .cells
                .iter()
                .map(|(k, c)| {
                    (
                        k.clone(),
                        PanelCell {
                            exposure: f(k, c.exposure),
                            tweet_count: c.tweet_count,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn from_cells(cells: impl IntoIterator<Item = (PanelKey, PanelCell)>) -> ExposurePanel {
        ExposurePanel {
            cells: cells.into_iter().filter(|(_, c)| c.tweet_count > 0).collect(),
        }
    }
}

/// Drop annotations whose absolute tone is below `threshold` (0 keeps all).
pub fn filter_intensity<'a>(
    pairs: Vec<(&'a AlignedTweet, &'a Annotation)>,
    threshold: f64,
) -> Vec<(&'a AlignedTweet, &'a Annotation)> {
    if threshold <= 0.0 {
        return pairs;
    }
    pairs
        .into_iter()
        .filter(|(_, a)| a.tone().abs() >= threshold)
        .collect()
}

/// Sum tone per (ticker, date, label). Contributions are accumulated in
/// tweet-id order, so any permutation of the input gives identical bits.
pub fn build_exposures(annotated: &[(&AlignedTweet, &Annotation)], mode: AttributionMode) -> ExposurePanel {
    let mut shards: BTreeMap<&Ticker, Vec<(&AlignedTweet, &Annotation)>> = BTreeMap::new();
    for &(t, a) in annotated {
        if !a.labels.is_empty() {
            shards.entry(&t.tweet.ticker).or_default().push((t, a));
        }
    }
    let shards: Vec<_> = shards.into_values().collect();
    let built: Vec<BTreeMap<PanelKey, PanelCell>> = shards
        .into_par_iter()
        .map(|mut shard| {
            shard.sort_by(|x, y| x.0.tweet.id.cmp(&y.0.tweet.id));
            let mut cells: BTreeMap<PanelKey, PanelCell> = BTreeMap::new();
            for (t, a) in shard {
                let share = match mode {
                    AttributionMode::Duplicate => a.tone(),
                    AttributionMode::Proportional => a.tone() / a.labels.len() as f64,
                };
                for label in &a.labels {
                    let cell = cells
                        .entry(PanelKey {
                            ticker: t.tweet.ticker.clone(),
                            date: t.trading_date,
                            label: label.clone(),
                        })
                        .or_insert(PanelCell {
                            exposure: 0.0,
                            tweet_count: 0,
                        });
                    cell.exposure += share;
                    cell.tweet_count += 1;
                }
            }
            cells
        })
        .collect();
    ExposurePanel {
        cells: built.into_iter().flatten().collect(),
    }
}

pub fn write_panel<W: Write>(out: W, panel: &ExposurePanel) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::csv("<panel>", e);
    w.write_record(["ticker", "date", "label", "exposure", "tweet_count"])
        .map_err(wrap)?;
    for (k, c) in panel.iter() {
        w.write_record([
            k.ticker.to_string(),
            k.date.to_string(),
            k.label.to_string(),
            c.exposure.to_string(),
            c.tweet_count.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<panel>", e))
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, field: &'static str, line: usize) -> Result<T> {
    let s = rec.get(i).ok_or(Error::MissingField { field, line })?;
    s.trim().parse().map_err(|_| Error::BadField {
        field,
        value: s.to_string(),
        line,
    })
}

fn parse_ticker(rec: &csv::StringRecord, i: usize, line: usize) -> Result<Ticker> {
    let s = rec.get(i).ok_or(Error::MissingField { field: "ticker", line })?;
    Ticker::new(s).ok_or_else(|| Error::InvalidTicker {
        value: s.to_string(),
        line,
    })
}

pub fn read_panel(path: &Path, taxonomy: &Taxonomy) -> Result<ExposurePanel> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut cells = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let key = PanelKey {
            ticker: parse_ticker(&rec, 0, line)?,
            date: parse_field(&rec, 1, "date", line)?,
            label: taxonomy.label(rec.get(2).unwrap_or(""))?,
        };
        let cell = PanelCell {
            exposure: parse_field(&rec, 3, "exposure", line)?,
            tweet_count: parse_field(&rec, 4, "tweet_count", line)?,
        };
        cells.insert(key, cell);
    }
    Ok(ExposurePanel::from_cells(cells))
}

/// One panel key joined with its forward returns.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSample {
    pub ticker: Ticker,
    pub event_date: TradingDate,
    pub label: EventLabel,
    pub exposure: f64,
    /// Absent horizons ran past the end of the price series.
    pub fwd: BTreeMap<Horizon, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SampleJoin {
    #[serde(skip)]
    pub samples: Vec<EventSample>,
    /// Keys whose ticker has no price series.
    pub orphans: usize,
    /// Keys dated on a day that is not a trading row of their series.
    pub off_calendar: usize,
    /// Keys with no 1-day forward return (last price date).
    pub no_forward: usize,
}

/// Join every panel key with its forward returns at each horizon.
pub fn event_samples(panel: &ExposurePanel, prices: &PriceMap, horizons: &[Horizon]) -> SampleJoin {
    let one_day = Horizon::new(1).expect("1 is a valid horizon");
    let mut join = SampleJoin::default();
    for (k, c) in panel.iter() {
        let Some(series) = prices.get(&k.ticker) else {
            join.orphans += 1;
            continue;
        };
        let Some(row) = series.position(k.date) else {
            join.off_calendar += 1;
            continue;
        };
        if forward_return_at(series, row, one_day).is_none() {
            join.no_forward += 1;
            continue;
        }
        let fwd = horizons
            .iter()
            .filter_map(|&h| forward_return_at(series, row, h).map(|r| (h, r)))
            .collect();
        join.samples.push(EventSample {
            ticker: k.ticker.clone(),
            event_date: k.date,
            label: k.label.clone(),
            exposure: c.exposure,
            fwd,
        });
    }
    join
}

pub fn write_samples<W: Write>(out: W, samples: &[EventSample], horizons: &[Horizon]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::csv("<samples>", e);
    let mut header: Vec<String> = ["ticker", "date", "label", "exposure"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(horizons.iter().map(|h| format!("fwd_{h}")));
    w.write_record(&header).map_err(wrap)?;
    for s in samples {
        let mut row = vec![
            s.ticker.to_string(),
            s.event_date.to_string(),
            s.label.to_string(),
            s.exposure.to_string(),
        ];
        row.extend(
            horizons
                .iter()
                .map(|h| s.fwd.get(h).map(|r| r.to_string()).unwrap_or_default()),
        );
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<samples>", e))
}

/// Read an event-sample file; horizons come from its `fwd_<n>d` columns.
pub fn read_samples(path: &Path, taxonomy: &Taxonomy) -> Result<(Vec<EventSample>, Vec<Horizon>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let horizons = headers
        .iter()
        .skip(4)
        .map(|h| {
            h.strip_prefix("fwd_")
                .and_then(|d| d.strip_suffix('d'))
                .and_then(|d| d.parse::<u32>().ok())
                .ok_or_else(|| Error::BadField {
                    field: "header",
                    value: h.to_string(),
                    line: 1,
                })
                .and_then(Horizon::new)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut fwd = BTreeMap::new();
        for (j, &h) in horizons.iter().enumerate() {
            if rec.get(4 + j).is_some_and(|s| !s.trim().is_empty()) {
                fwd.insert(h, parse_field(&rec, 4 + j, "fwd", line)?);
            }
        }
        samples.push(EventSample {
            ticker: parse_ticker(&rec, 0, line)?,
            event_date: parse_field(&rec, 1, "date", line)?,
            label: taxonomy.label(rec.get(2).unwrap_or(""))?,
            exposure: parse_field(&rec, 3, "exposure", line)?,
            fwd,
        });
    }
    Ok((samples, horizons))
}
