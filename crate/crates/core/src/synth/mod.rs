//! Synthetic tweet and price datasets with planted event-conditional drifts.
//!
//! The random stream is SplitMix64 (Steele, Lea & Flood 2014 constants) and
//! normals come from the Box-Muller transform, so any port that reproduces
//! those two routines reproduces the fixtures.

pub mod oracle;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate, TimeZone, Utc, Weekday};
use serde::{Deserialize, Serialize};

use crate::annotation::{tag_events_mock, KeywordMap, Lexicon};
use crate::domain::{
    validate_price_series, PriceBar, Taxonomy, Ticker, TradingDate, Tweet,
};
use crate::error::{Error, Result};
use crate::ingestion::{write_prices, write_tweets, PriceMap};

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n) by multiply-shift.
    pub fn below(&mut self, n: u64) -> u64 {
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Standard normal; one Box-Muller pair per call, second value discarded.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub label: String,
    /// Added to each of the `max_horizon` daily log returns after an occurrence.
    pub drift: f64,
    pub occurrences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_tickers: usize,
    pub n_days: usize,
    pub n_tweets: usize,
    pub seed: u64,
    pub daily_vol: f64,
    pub start_date: NaiveDate,
    pub planted_effects: Vec<PlantedEffect>,
    pub label_keyword_map: BTreeMap<String, Vec<String>>,
    pub tone_noise_std: f64,
    pub max_horizon: u32,
    pub q_max: usize,
}

pub fn default_keywords() -> BTreeMap<String, Vec<String>> {
    [
        ("Social Media Backlash", "backlash"),
        ("Negative Press", "scandal"),
        ("Viral Marketing Campaign", "viral"),
        ("Brand Boycott", "boycott"),
        ("Speculation/Rumor", "rumor"),
        ("Retail Investor Buzz", "buzz"),
        ("Geopolitical Tension", "sanctions"),
    ]
    .into_iter()
    .map(|(l, k)| (l.to_string(), vec![k.to_string()]))
    .collect()
}

impl Default for SynthConfig {
    /// 50 tickers over 250 trading days, 5,000 tweets, one planted
    /// negative-drift label and two null labels.
    fn default() -> Self {
        SynthConfig {
            n_tickers: 50,
            n_days: 250,
            n_tweets: 5_000,
            seed: 42,
            daily_vol: 0.01,
            start_date: NaiveDate::from_ymd_opt(2017, 1, 2).expect("valid date"),
            planted_effects: vec![
                PlantedEffect {
                    label: "Speculation/Rumor".into(),
                    drift: -0.005,
                    occurrences: 200,
                },
                PlantedEffect {
                    label: "Retail Investor Buzz".into(),
                    drift: 0.0,
                    occurrences: 100,
                },
                PlantedEffect {
                    label: "Geopolitical Tension".into(),
                    drift: 0.0,
                    occurrences: 100,
                },
            ],
            label_keyword_map: default_keywords(),
            tone_noise_std: 0.2,
            max_horizon: 7,
            q_max: 10,
        }
    }
}

const TONE_TOKENS: usize = 10;
const FILLER: [&str; 6] = ["watching", "chart", "volume", "today", "ticker", "update"];

/// Lexicon that decodes the tone tokens the generator writes.
pub fn synth_lexicon() -> Lexicon {
    Lexicon::new([("bullish", 1.0), ("bearish", -1.0), ("steady", 0.0)])
        .expect("static lexicon is valid")
}

impl SynthConfig {
    pub fn validate(&self) -> Result<Taxonomy> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.n_tickers < self.q_max {
            return bad(format!("n_tickers {} < q_max {}", self.n_tickers, self.q_max));
        }
        if self.n_days <= self.max_horizon as usize + 5 {
            return bad(format!("n_days {} must exceed max_horizon + 5", self.n_days));
        }
        if !(self.daily_vol > 0.0 && self.daily_vol.is_finite()) {
            return bad("daily_vol must be positive".into());
        }
        if self.tone_noise_std.is_nan() || self.tone_noise_std < 0.0 {
            return bad("tone_noise_std must be non-negative".into());
        }
        if self.n_tickers > 1000 {
            return bad("at most 1000 synthetic tickers".into());
        }
        let planted: usize = self.planted_effects.iter().map(|e| e.occurrences).sum();
        if planted > self.n_tweets {
            return bad(format!("{planted} planted occurrences exceed n_tweets {}", self.n_tweets));
        }
        let taxonomy = Taxonomy::new(self.label_keyword_map.keys())?;
        for e in &self.planted_effects {
            if !e.drift.is_finite() {
                return bad(format!("drift for {:?} is not finite", e.label));
            }
            let has_kw = self
                .label_keyword_map
                .get(&e.label)
                .is_some_and(|k| k.iter().any(|k| !k.trim().is_empty()));
            if !has_kw {
                return bad(format!("planted label {:?} has no keyword", e.label));
            }
        }
        // Generated filler must never trigger a tag on its own.
        let mut vocab = format!("{} bullish bearish steady", FILLER.join(" "));
        for i in 0..self.n_tickers {
            vocab.push_str(&format!(" $t{i:03}"));
        }
        for (label, kws) in &self.label_keyword_map {
            for kw in kws {
                let kw = kw.trim().to_lowercase();
                if !kw.is_empty() && vocab.contains(&kw) {
                    return bad(format!("keyword {kw:?} for {label:?} collides with generated text"));
                }
            }
        }
        Ok(taxonomy)
    }
}

/// One planted event.
#[derive(Debug, Clone, PartialEq)]
pub struct Occurrence {
    pub ticker: Ticker,
    pub date: TradingDate,
    pub label: String,
    pub drift: f64,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub tweets: Vec<Tweet>,
    pub prices: PriceMap,
    /// Sorted by (ticker, date, label).
    pub manifest: Vec<Occurrence>,
    pub taxonomy: Taxonomy,
    pub keywords: KeywordMap,
    pub lexicon: Lexicon,
}

fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

fn tone_text(rng: &mut SplitMix64, tone: f64) -> String {
    let k = (tone.abs() * TONE_TOKENS as f64).round() as usize;
    let polar = if tone >= 0.0 { "bullish" } else { "bearish" };
    let mut words: Vec<&str> = Vec::with_capacity(TONE_TOKENS + 1);
    words.extend(std::iter::repeat_n(polar, k));
    words.extend(std::iter::repeat_n("steady", TONE_TOKENS - k));
    words.push(FILLER[rng.below(FILLER.len() as u64) as usize]);
    words.join(" ")
}

/// Generate a dataset in memory. Identical configs give identical data.
pub fn generate_data(config: &SynthConfig) -> Result<SynthData> {
    let taxonomy = config.validate()?;
    let keywords = KeywordMap::new(&taxonomy, config.label_keyword_map.clone())?;
    let mut rng = SplitMix64::new(config.seed);
    let days = business_days(config.start_date, config.n_days);
    let tickers: Vec<Ticker> = (0..config.n_tickers)
        .map(|i| Ticker::new(&format!("T{i:03}")).expect("synthetic ticker is valid"))
        .collect();
    let h = config.max_horizon as usize;

    // Event windows [d, d + h] never overlap on a ticker, so each event's
    // forward returns carry only its own drift.
    let mut occupied = vec![vec![false; config.n_days]; config.n_tickers];
    let mut drift = vec![vec![0.0f64; config.n_days]; config.n_tickers];
    let mut placed: Vec<(usize, usize, usize)> = Vec::new();
    let last_start = config.n_days - h - 1;
    for (e_idx, effect) in config.planted_effects.iter().enumerate() {
        for _ in 0..effect.occurrences {
            let mut found = None;
            for _ in 0..10_000 {
                let t = rng.below(config.n_tickers as u64) as usize;
                let d = 1 + rng.below(last_start as u64) as usize;
                if occupied[t][d..=d + h].iter().all(|o| !o) {
                    found = Some((t, d));
                    break;
                }
            }
            let (t, d) = found.ok_or_else(|| {
                Error::ConfigInvalid("too many planted occurrences for the ticker-day grid".into())
            })?;
            occupied[t][d..=d + h].iter_mut().for_each(|o| *o = true);
            for r in &mut drift[t][d + 1..=d + h] {
                *r += effect.drift;
            }
            placed.push((t, d, e_idx));
        }
    }

    let mut prices = PriceMap::new();
    for (t, ticker) in tickers.iter().enumerate() {
        let mut log_p = 100f64.ln();
        let mut bars = Vec::with_capacity(config.n_days);
        for (d, day) in days.iter().enumerate() {
            if d > 0 {
                log_p += config.daily_vol * rng.normal() + drift[t][d];
            }
            bars.push(PriceBar {
                date: (*day).into(),
                close: log_p.exp(),
            });
        }
        prices.insert(ticker.clone(), validate_price_series(ticker.clone(), bars)?);
    }

    let instant = |rng: &mut SplitMix64, d: usize| {
        let secs = 13 * 3600 + 30 * 60 + rng.below(6 * 3600 + 30 * 60) as i64;
        let midnight = days[d].and_hms_opt(0, 0, 0).expect("midnight exists");
        Utc.from_utc_datetime(&midnight) + Duration::seconds(secs)
    };

    let mut drafts: Vec<(chrono::DateTime<Utc>, usize, String)> = Vec::new();
    for &(t, d, e_idx) in &placed {
        let effect = &config.planted_effects[e_idx];
        let kws = &config.label_keyword_map[&effect.label];
        let kw = &kws[rng.below(kws.len() as u64) as usize];
        let direction = if effect.drift > 0.0 {
            1.0
        } else if effect.drift < 0.0 {
            -1.0
        } else {
            0.0
        };
        let tone = (direction + config.tone_noise_std * rng.normal()).clamp(-1.0, 1.0);
        let text = format!("{kw} {} ${}", tone_text(&mut rng, tone), tickers[t]);
        drafts.push((instant(&mut rng, d), t, text));
    }
    let background = config.n_tweets - placed.len();
    for _ in 0..background {
        let t = rng.below(config.n_tickers as u64) as usize;
        let d = rng.below(config.n_days as u64) as usize;
        let tone = (0.5 * rng.normal()).clamp(-1.0, 1.0);
        let text = format!("{} ${}", tone_text(&mut rng, tone), tickers[t]);
        drafts.push((instant(&mut rng, d), t, text));
    }
    // Stable sort keeps generation order among identical timestamps.
    drafts.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let tweets: Vec<Tweet> = drafts
        .into_iter()
        .enumerate()
        .map(|(i, (timestamp, t, text))| Tweet {
            id: format!("syn{i:06}"),
            timestamp,
            ticker: tickers[t].clone(),
            text,
        })
        .collect();
    debug_assert!(tweets.iter().filter(|t| !tag_events_mock(t, &keywords).is_empty()).count() == placed.len());

    let mut manifest: Vec<Occurrence> = placed
        .iter()
        .map(|&(t, d, e)| Occurrence {
            ticker: tickers[t].clone(),
            date: days[d].into(),
            label: config.planted_effects[e].label.clone(),
            drift: config.planted_effects[e].drift,
        })
        .collect();
    manifest.sort_by(|a, b| {
        (&a.ticker, a.date, &a.label).cmp(&(&b.ticker, b.date, &b.label))
    });

    Ok(SynthData {
        tweets,
        prices,
        manifest,
        taxonomy,
        keywords,
        lexicon: synth_lexicon(),
    })
}

pub fn write_manifest<W: Write>(out: W, manifest: &[Occurrence]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::csv("<manifest>", e);
    w.write_record(["ticker", "date", "label", "drift"]).map_err(wrap)?;
    for o in manifest {
        w.write_record([o.ticker.to_string(), o.date.to_string(), o.label.clone(), o.drift.to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<manifest>", e))
}

/// Paths written by [`generate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SynthFiles {
    pub tweets: PathBuf,
    pub prices: PathBuf,
    pub manifest: PathBuf,
    pub taxonomy: PathBuf,
    pub lexicon: PathBuf,
    pub keywords: PathBuf,
}

impl SynthFiles {
    pub fn in_dir(dir: &Path) -> Self {
        SynthFiles {
            tweets: dir.join("tweets.csv"),
            prices: dir.join("prices.csv"),
            manifest: dir.join("manifest.csv"),
            taxonomy: dir.join("taxonomy.txt"),
            lexicon: dir.join("lexicon.csv"),
            keywords: dir.join("keywords.csv"),
        }
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Generate and write the corpus, prices, ground-truth manifest and the
/// taxonomy, lexicon and keyword files needed to run the pipeline on them.
pub fn generate(config: &SynthConfig, dir: &Path) -> Result<(SynthData, SynthFiles)> {
    let data = generate_data(config)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = SynthFiles::in_dir(dir);
    write_file(&files.tweets, |b| write_tweets(b, &data.tweets))?;
    write_file(&files.prices, |b| write_prices(b, &data.prices))?;
    write_file(&files.manifest, |b| write_manifest(b, &data.manifest))?;
    write_file(&files.taxonomy, |b| {
        b.extend_from_slice(data.taxonomy.render().as_bytes());
        Ok(())
    })?;
    write_file(&files.lexicon, |b| {
        b.extend_from_slice(data.lexicon.to_csv().as_bytes());
        Ok(())
    })?;
    write_file(&files.keywords, |b| {
        b.extend_from_slice(data.keywords.to_csv().as_bytes());
        Ok(())
    })?;
    Ok((data, files))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 1234567, computed with arbitrary-precision integers.
        let mut r = SplitMix64::new(1234567);
        assert_eq!(r.next_u64(), 6457827717110365317);
        assert_eq!(r.next_u64(), 3203168211198807973);
        assert_eq!(r.next_u64(), 9817491932198370423);
    }

    #[test]
    fn uniform_and_below_ranges() {
        let mut r = SplitMix64::new(9);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(r.below(7) < 7);
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = SplitMix64::new(42);
        let xs: Vec<f64> = (0..20_000).map(|_| r.normal()).collect();
        let m = crate::stats::mean(&xs);
        let s = crate::stats::sample_std(&xs);
        assert!(m.abs() < 0.03, "{m}");
        assert!((s - 1.0).abs() < 0.03, "{s}");
    }

    #[test]
    fn small_config_shapes() {
        let cfg = SynthConfig {
            n_tickers: 12,
            n_days: 40,
            n_tweets: 100,
            planted_effects: vec![PlantedEffect {
                label: "Brand Boycott".into(),
                drift: 0.01,
                occurrences: 10,
            }],
            ..SynthConfig::default()
        };
        let data = generate_data(&cfg).unwrap();
        assert_eq!(data.tweets.len(), 100);
        assert_eq!(data.prices.len(), 12);
        assert!(data.prices.values().all(|s| s.len() == 40));
        assert_eq!(data.manifest.len(), 10);
        let tagged = data
            .tweets
            .iter()
            .filter(|t| !tag_events_mock(t, &data.keywords).is_empty())
            .count();
        assert_eq!(tagged, 10);
    }

    #[test]
    fn invalid_configs() {
        let base = SynthConfig::default();
        let cases = [
            SynthConfig { n_tickers: 5, ..base.clone() },
            SynthConfig { n_days: 12, ..base.clone() },
            SynthConfig { daily_vol: 0.0, ..base.clone() },
            SynthConfig { n_tweets: 10, ..base.clone() },
            SynthConfig {
                label_keyword_map: [("Speculation/Rumor".to_string(), vec!["chart".to_string()])].into(),
                planted_effects: vec![PlantedEffect { label: "Speculation/Rumor".into(), drift: 0.0, occurrences: 1 }],
                ..base.clone()
            },
        ];
        for c in cases {
            assert!(matches!(generate_data(&c), Err(Error::ConfigInvalid(_))), "{c:?}");
        }
    }
}
