//! Return streams from the exposure panel: per-label event studies,
//! cross-sectional quantile portfolios, and equity curves.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{EventLabel, Horizon, Ticker, TradingDate};
use crate::error::{Error, Result};
use crate::factor::{EventSample, ExposurePanel};
use crate::ingestion::{forward_return_at, PriceMap};

/// How an event's forward return enters the event study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionMode {
    /// The unsigned post-event return.
    #[default]
    Raw,
    /// Return multiplied by the sign of the exposure; zero exposures dropped.
    ToneSigned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStudy {
    pub label: EventLabel,
    pub horizon: Horizon,
    /// Position returns, one per retained event.
    pub returns: Vec<f64>,
    /// `(exposure, unsigned forward return)` per retained event, for IC.
    pub ic_pairs: Vec<(f64, f64)>,
    pub dates: Vec<TradingDate>,
    /// Events dropped for zero exposure in tone-signed mode.
    pub dropped: usize,
}

impl EventStudy {
    /// IC pairs grouped by event date.
    pub fn pairs_by_date(&self) -> BTreeMap<TradingDate, Vec<(f64, f64)>> {
        let mut out: BTreeMap<TradingDate, Vec<(f64, f64)>> = BTreeMap::new();
        for (d, p) in self.dates.iter().zip(&self.ic_pairs) {
            out.entry(*d).or_default().push(*p);
        }
        out
    }
}

pub fn event_study(
    samples: &[EventSample],
    label: &EventLabel,
    h: Horizon,
    position: PositionMode,
) -> Result<EventStudy> {
    let mut study = EventStudy {
        label: label.clone(),
        horizon: h,
        returns: Vec::new(),
        ic_pairs: Vec::new(),
        dates: Vec::new(),
        dropped: 0,
    };
    for s in samples.iter().filter(|s| &s.label == label) {
        let Some(&fwd) = s.fwd.get(&h) else { continue };
        let r = match position {
            PositionMode::Raw => fwd,
            PositionMode::ToneSigned => {
                if s.exposure == 0.0 {
                    study.dropped += 1;
                    continue;
                }
                fwd * s.exposure.signum()
            }
        };
        study.returns.push(r);
        study.ic_pairs.push((s.exposure, fwd));
        study.dates.push(s.event_date);
    }
    if study.returns.len() < 2 {
        return Err(Error::InsufficientSamples {
            label: label.to_string(),
            horizon: h,
            n: study.returns.len(),
        });
    }
    Ok(study)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortfolioSide {
    /// Top quantile minus bottom quantile.
    LongShort,
    /// Top quantile only.
    LongOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SortSpec {
    pub horizon: Horizon,
    pub quantiles: usize,
    pub side: PortfolioSide,
    /// Restrict ranking to one label; `None` sums exposure over all labels.
    pub label: Option<EventLabel>,
}

impl SortSpec {
    pub fn long_short(horizon: Horizon) -> Self {
        SortSpec {
            horizon,
            quantiles: 10,
            side: PortfolioSide::LongShort,
            label: None,
        }
    }

    pub fn long_only(horizon: Horizon) -> Self {
        SortSpec {
            horizon,
            quantiles: 5,
            side: PortfolioSide::LongOnly,
            label: None,
        }
    }

    /// File-name friendly descriptor, e.g. `ls_q10_1d_all`.
    pub fn descriptor(&self) -> String {
        let side = match self.side {
            PortfolioSide::LongShort => "ls",
            PortfolioSide::LongOnly => "lo",
        };
        let label = match &self.label {
            None => "all".to_string(),
            Some(l) => l
                .as_str()
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
                .collect(),
        };
        format!("{side}_q{}_{}_{label}", self.quantiles, self.horizon)
    }
}

/// Quantile groups for one holding date, formed from the previous date's
/// exposures. `groups[0]` is the lowest-exposure group.
#[derive(Debug, Clone, PartialEq)]
pub struct Formation {
    pub date: TradingDate,
    pub formation_date: TradingDate,
    pub groups: Vec<Vec<Ticker>>,
    /// Mean forward return per group, aligned with `groups`.
    pub group_returns: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSeries {
    pub spec: SortSpec,
    pub points: Vec<(TradingDate, f64)>,
    /// Dates with some exposure but fewer than `quantiles` usable tickers.
    pub skipped_dates: usize,
}

fn calendar(prices: &PriceMap) -> Vec<TradingDate> {
    let dates: BTreeSet<TradingDate> = prices
        .values()
        .flat_map(|s| s.bars().iter().map(|b| b.date))
        .collect();
    dates.into_iter().collect()
}

/// Assign tickers to `q` groups by ascending exposure, ties broken by ticker.
pub fn quantile_groups(mut ranked: Vec<(Ticker, f64)>, q: usize) -> Vec<Vec<Ticker>> {
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let n = ranked.len();
    (0..q)
        .map(|g| {
            ranked[g * n / q..(g + 1) * n / q]
                .iter()
                .map(|(t, _)| t.clone())
                .collect()
        })
        .collect()
}

/// For each trading date t, rank tickers by exposure dated t-1 and record
/// the quantile groups with their mean h-day forward return from t-1.
/// Returns the formations and the number of skipped dates.
pub fn formations(panel: &ExposurePanel, prices: &PriceMap, spec: &SortSpec) -> (Vec<Formation>, usize) {
    assert!(spec.quantiles >= 2, "at least two quantiles required");
    let cal = calendar(prices);
    let sections = panel.cross_sections(spec.label.as_ref());
    let results: Vec<Option<std::result::Result<Formation, ()>>> = (1..cal.len())
        .into_par_iter()
        .map(|k| {
            let (formed, held) = (cal[k - 1], cal[k]);
            let section = sections.get(&formed)?;
            let usable: Vec<(Ticker, f64, f64)> = section
                .iter()
                .filter_map(|(t, &e)| {
                    let s = prices.get(t)?;
                    let row = s.position(formed)?;
                    forward_return_at(s, row, spec.horizon).map(|r| (t.clone(), e, r))
                })
                .collect();
            if usable.len() < spec.quantiles {
                return Some(Err(()));
            }
            let fwd: BTreeMap<&Ticker, f64> = usable.iter().map(|(t, _, r)| (t, *r)).collect();
            let groups = quantile_groups(
                usable.iter().map(|(t, e, _)| (t.clone(), *e)).collect(),
                spec.quantiles,
            );
            let group_returns = groups
                .iter()
                .map(|g| g.iter().map(|t| fwd[t]).sum::<f64>() / g.len() as f64)
                .collect();
            Some(Ok(Formation {
                date: held,
                formation_date: formed,
                groups,
                group_returns,
            }))
        })
        .collect();
    let mut out = Vec::new();
    let mut skipped = 0;
    for r in results.into_iter().flatten() {
        match r {
            Ok(f) => out.push(f),
            Err(()) => skipped += 1,
        }
    }
    (out, skipped)
}

pub fn portfolio_sort(panel: &ExposurePanel, prices: &PriceMap, spec: &SortSpec) -> PortfolioSeries {
    let (forms, skipped_dates) = formations(panel, prices, spec);
    let points = forms
        .iter()
        .map(|f| {
            let top = *f.group_returns.last().expect("q >= 2");
            let r = match spec.side {
                PortfolioSide::LongShort => top - f.group_returns[0],
                PortfolioSide::LongOnly => top,
            };
            (f.date, r)
        })
        .collect();
    PortfolioSeries {
        spec: spec.clone(),
        points,
        skipped_dates,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compounding {
    /// Returns are log returns: equity = exp(cumulative sum).
    #[default]
    LogSum,
    /// Returns are simple returns: equity = cumulative product of (1 + r).
    Simple,
}

/// Equity after each period, starting from 1.0 before the first period.
#[derive(Debug, Clone, PartialEq)]
pub struct EquityCurve {
    pub points: Vec<(TradingDate, f64)>,
    pub mode: Compounding,
}

impl EquityCurve {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn final_value(&self) -> f64 {
        self.points.last().map_or(1.0, |p| p.1)
    }

    /// Drawdown including the initial equity of 1.0.
    pub fn max_drawdown(&self) -> f64 {
        let mut v = vec![1.0];
        v.extend(self.values());
        crate::stats::max_drawdown(&v)
    }
}

pub fn equity_curve(points: &[(TradingDate, f64)], mode: Compounding) -> Result<EquityCurve> {
    if points.is_empty() {
        return Err(Error::TooFewSamples { n: 0, required: 1 });
    }
    let mut out = Vec::with_capacity(points.len());
    match mode {
        Compounding::LogSum => {
            let mut acc = 0.0;
            for &(d, r) in points {
                acc += r;
                out.push((d, acc.exp()));
            }
        }
        Compounding::Simple => {
            let mut eq = 1.0;
            for (index, &(d, r)) in points.iter().enumerate() {
                if r <= -1.0 {
                    return Err(Error::SimpleModeReturnBelowNeg100Pct { index, value: r });
                }
                eq *= 1.0 + r;
                out.push((d, eq));
            }
        }
    }
    Ok(EquityCurve { points: out, mode })
}

/// `date,value` rows, ascending by date.
pub fn write_series<W: Write>(out: W, points: &[(TradingDate, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::csv("<series>", e);
    w.write_record(["date", "value"]).map_err(wrap)?;
    for (d, v) in points {
        w.write_record([d.to_string(), v.to_string()]).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<series>", e))
}

pub fn read_series(path: &Path) -> Result<Vec<(TradingDate, f64)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |field: &'static str, v: &str| Error::BadField {
            field,
            value: v.to_string(),
            line,
        };
        let d = rec.get(0).unwrap_or("");
        let v = rec.get(1).unwrap_or("");
        out.push((
            d.parse().map_err(|_| bad("date", d))?,
            v.parse().map_err(|_| bad("value", v))?,
        ));
    }
    Ok(out)
}
