//! Stage runner. Every stage reads the files written by earlier stages and
//! writes its own outputs plus a `manifest.json` under `<out>/<stage>/`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Component, Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotation::{
    annotate_llm, annotate_mock, annotate_replay, read_annotations, write_annotations,
    AnnotationCache, HttpTransport, KeywordMap, Lexicon, LlmConfig, PromptTemplate, RetryPolicy,
    Transport, UnknownLabelPolicy, DEFAULT_TEMPLATE,
};
use crate::backtest::{
    equity_curve, event_study, portfolio_sort, Compounding, EquityCurve, EventStudy, PositionMode,
    SortSpec,
};
use crate::domain::{EventLabel, Horizon, Taxonomy, TradingDate};
use crate::error::{Error, Result};
use crate::factor::{
    build_exposures, event_samples, filter_intensity, read_panel, read_samples, write_panel,
    write_samples, AttributionMode,
};
use crate::ingestion::{
    align_tweets_with_cutoff, compute_all_returns, load_prices, load_tweets, read_alignment,
    write_alignment, write_prices, write_returns, write_tweets, AlignedTweet, DayCutoff, LoadMode,
};
use crate::report::{
    emit_plot_data, read_metrics_json, render_metrics_table, render_report, write_metrics_json,
    LabelResult, PlotData, TableFormat,
};
use crate::stats::{daily_mean_ic, metrics_row, IcMode, MetricsRow};
use crate::synth::{self, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Lexicon tone and keyword tags; offline.
    #[default]
    Mock,
    /// Remote model, endpoint and token from the environment.
    Llm,
    /// Cache only.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    pub model_id: String,
    /// Prompt template file; the built-in template when absent.
    pub template: Option<PathBuf>,
    pub template_version: String,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub unknown_labels: UnknownLabelPolicy,
    pub fail_soft: bool,
    pub timeout_ms: u64,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            model_id: "event-tagger".into(),
            template: None,
            template_version: "v1".into(),
            max_in_flight: 8,
            retry: RetryPolicy::default(),
            unknown_labels: UnknownLabelPolicy::Drop,
            fail_soft: false,
            timeout_ms: 30_000,
        }
    }
}

/// JSON run configuration. Relative paths resolve against the directory
/// of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tweets: Option<PathBuf>,
    pub prices: Option<PathBuf>,
    /// One label per line; the seven default labels when absent.
    pub taxonomy: Option<PathBuf>,
    /// `term,weight` CSV; a small built-in lexicon when absent.
    pub lexicon: Option<PathBuf>,
    /// `label,keyword` CSV for the mock backend.
    pub keywords: Option<PathBuf>,
    /// Annotation cache; `<out>/annotate/cache.jsonl` when absent.
    pub cache: Option<PathBuf>,
    pub out: PathBuf,
    pub attribution: AttributionMode,
    pub horizons: Vec<Horizon>,
    pub long_short_quantiles: usize,
    pub long_only_quantiles: usize,
    pub position: PositionMode,
    pub ic_mode: IcMode,
    /// Minimum |tone| kept when building exposures.
    pub intensity_threshold: f64,
    pub backend: Backend,
    pub load_mode: LoadMode,
    /// UTC hour from which tweets count towards the next day.
    pub day_cutoff_hour: Option<u32>,
    pub synth: SynthConfig,
    pub llm: LlmSettings,
    /// Add elapsed milliseconds to each manifest. Off by default so that
    /// repeated runs produce identical trees.
    pub record_wall_time: bool,
    /// Worker threads; not part of the recorded configuration.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip)]
    base: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tweets: None,
            prices: None,
            taxonomy: None,
            lexicon: None,
            keywords: None,
            cache: None,
            out: PathBuf::from("out"),
            attribution: AttributionMode::default(),
            horizons: Horizon::DEFAULTS.to_vec(),
            long_short_quantiles: 10,
            long_only_quantiles: 5,
            position: PositionMode::default(),
            ic_mode: IcMode::default(),
            intensity_threshold: 0.0,
            backend: Backend::default(),
            load_mode: LoadMode::default(),
            day_cutoff_hour: None,
            synth: SynthConfig::default(),
            llm: LlmSettings::default(),
            record_wall_time: false,
            workers: None,
            base: PathBuf::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        config.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    /// Directory relative paths are resolved against.
    pub fn base(&self) -> &Path {
        &self.base
    }

    pub fn with_base(mut self, base: impl Into<PathBuf>) -> Self {
        self.base = base.into();
        self
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        normalize(&self.base.join(p))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if self.horizons.is_empty() {
            return bad("horizons must not be empty");
        }
        if self.long_short_quantiles < 2 {
            return bad("long_short_quantiles must be at least 2");
        }
        if self.long_only_quantiles < 2 {
            return bad("long_only_quantiles must be at least 2");
        }
        if !(self.intensity_threshold >= 0.0 && self.intensity_threshold.is_finite()) {
            return bad("intensity_threshold must be a non-negative number");
        }
        if self.day_cutoff_hour.is_some_and(|h| h > 23) {
            return bad("day_cutoff_hour must be in 0..=23");
        }
        if self.llm.max_in_flight == 0 {
            return bad("llm.max_in_flight must be at least 1");
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1");
        }
        Ok(())
    }

    fn horizons(&self) -> Vec<Horizon> {
        let mut h = self.horizons.clone();
        h.sort();
        h.dedup();
        h
    }
}

/// Lexical `.`/`..` removal, so paths compare without touching the disk.
fn normalize(p: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in p.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if matches!(out.components().next_back(), Some(Component::Normal(_))) {
                    out.pop();
                } else {
                    out.push("..");
                }
            }
            c => out.push(c),
        }
    }
    out
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: &'static str,
    #[serde(skip)]
    pub dir: PathBuf,
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub counts: BTreeMap<String, u64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    stage: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    inputs: &'a BTreeMap<String, FileDigest>,
    outputs: &'a [FileDigest],
    counts: &'a BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_ms: Option<u128>,
}

/// Inputs and counts collected while a stage runs.
#[derive(Default)]
struct Record {
    inputs: Vec<(&'static str, PathBuf)>,
    outputs: Vec<PathBuf>,
    counts: BTreeMap<String, u64>,
}

impl Record {
    fn input(&mut self, name: &'static str, path: &Path) {
        self.inputs.push((name, path.to_path_buf()));
    }

    fn count(&mut self, name: impl Into<String>, n: usize) {
        self.counts.insert(name.into(), n as u64);
    }
}

fn write_buf(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn slug(label: &EventLabel) -> String {
    let mut s = String::new();
    for c in label.as_str().chars() {
        if c.is_ascii_alphanumeric() {
            s.push(c.to_ascii_lowercase());
        } else if !s.ends_with('_') {
            s.push('_');
        }
    }
    s.trim_matches('_').to_string()
}

/// Mean position return per event date, compounded into an equity curve.
fn event_curve(study: &EventStudy) -> Result<EquityCurve> {
    let mut by_date: BTreeMap<TradingDate, (f64, usize)> = BTreeMap::new();
    for (d, r) in study.dates.iter().zip(&study.returns) {
        let e = by_date.entry(*d).or_insert((0.0, 0));
        e.0 += r;
        e.1 += 1;
    }
    let points: Vec<(TradingDate, f64)> = by_date
        .into_iter()
        .map(|(d, (s, n))| (d, s / n as f64))
        .collect();
    equity_curve(&points, Compounding::LogSum)
}

/// Metrics for one study; `None` when the Sharpe ratio is undefined.
fn study_metrics(study: &EventStudy, ic_mode: IcMode) -> Result<Option<MetricsRow>> {
    match metrics_row(study.label.clone(), &study.returns, &study.ic_pairs) {
        Ok(mut row) => {
            if ic_mode == IcMode::DailyMean {
                let by_date = study.pairs_by_date();
                row.ic = daily_mean_ic(by_date.values().map(Vec::as_slice));
            }
            Ok(Some(row))
        }
        Err(Error::ZeroVariance | Error::TooFewSamples { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub const STAGES: [&str; 6] = ["synth", "ingest", "annotate", "factors", "backtest", "report"];

/// A configured output tree.
pub struct Pipeline {
    config: RunConfig,
    out: PathBuf,
}

impl Pipeline {
    /// Output directory taken from the config.
    pub fn new(config: RunConfig) -> Result<Self> {
        let out = config.resolve(&config.out);
        Self::with_out(config, out)
    }

    pub fn with_out(config: RunConfig, out: impl AsRef<Path>) -> Result<Self> {
        config.validate()?;
        Ok(Pipeline {
            out: normalize(out.as_ref()),
            config,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.out.join(stage)
    }

    /// Run `f` on a pool sized by `workers`, or the global pool.
    fn pooled<T: Send>(&self, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        match self.config.workers {
            None => f(),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::ConfigInvalid(format!("thread pool: {e}")))?
                .install(f),
        }
    }

    fn stage<F>(&self, stage: &'static str, body: F) -> Result<StageReport>
    where
        F: FnOnce(&Path, &mut Record) -> Result<()> + Send,
    {
        let started = Instant::now();
        let dir = self.stage_dir(stage);
        let run = || -> Result<StageReport> {
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut record = Record::default();
            self.pooled(|| body(&dir, &mut record))?;
            self.finish(stage, &dir, record, started)
        };
        tracing::info!(stage, dir = %dir.display(), "stage started");
        let report = run().map_err(|e| e.in_stage(stage))?;
        tracing::info!(stage, counts = ?report.counts, "stage finished");
        Ok(report)
    }

    fn display(&self, path: &Path) -> String {
        let p = normalize(path);
        let shown = p.strip_prefix(&self.out).unwrap_or(&p);
        shown
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }

    fn finish(&self, stage: &'static str, dir: &Path, record: Record, started: Instant) -> Result<StageReport> {
        let mut inputs = BTreeMap::new();
        for (name, path) in &record.inputs {
            inputs.insert(
                name.to_string(),
                FileDigest {
                    path: self.display(path),
                    sha256: sha256_file(path)?,
                },
            );
        }
        let mut outputs = Vec::new();
        for path in &record.outputs {
            outputs.push(FileDigest {
                path: self.display(path),
                sha256: sha256_file(path)?,
            });
        }
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            stage,
            version: env!("CARGO_PKG_VERSION"),
            config: &self.config,
            inputs: &inputs,
            outputs: &outputs,
            counts: &record.counts,
            wall_time_ms: self
                .config
                .record_wall_time
                .then(|| started.elapsed().as_millis()),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_text(&dir.join("manifest.json"), &text)?;
        Ok(StageReport {
            stage,
            dir: dir.to_path_buf(),
            inputs,
            outputs,
            counts: record.counts,
        })
    }

    fn configured(&self, path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        path.as_ref()
            .map(|p| self.config.resolve(p))
            .ok_or_else(|| Error::ConfigInvalid(format!("`{key}` path is not configured")))
    }

    /// Path of an earlier stage's output, checked to exist.
    fn upstream(&self, stage: &'static str, file: &str) -> Result<PathBuf> {
        let path = self.stage_dir(stage).join(file);
        if path.is_file() {
            Ok(path)
        } else {
            Err(Error::MissingStageOutput { stage, path })
        }
    }

    fn taxonomy(&self, record: &mut Record) -> Result<Taxonomy> {
        match &self.config.taxonomy {
            Some(p) => {
                let p = self.config.resolve(p);
                record.input("taxonomy", &p);
                Taxonomy::load(&p)
            }
            None => Ok(Taxonomy::default_labels()),
        }
    }

    fn lexicon(&self, record: &mut Record) -> Result<Lexicon> {
        match &self.config.lexicon {
            Some(p) => {
                let p = self.config.resolve(p);
                record.input("lexicon", &p);
                Lexicon::load(&p)
            }
            None => Ok(Lexicon::finance_default()),
        }
    }

    fn keywords(&self, taxonomy: &Taxonomy, record: &mut Record) -> Result<KeywordMap> {
        match &self.config.keywords {
            Some(p) => {
                let p = self.config.resolve(p);
                record.input("keywords", &p);
                KeywordMap::load(&p, taxonomy)
            }
            None => KeywordMap::new(
                taxonomy,
                synth::default_keywords()
                    .into_iter()
                    .filter(|(label, _)| taxonomy.get(label).is_some()),
            ),
        }
    }

    fn cache_path(&self) -> PathBuf {
        match &self.config.cache {
            Some(p) => self.config.resolve(p),
            None => self.stage_dir("annotate").join("cache.jsonl"),
        }
    }

    fn llm_config(&self) -> Result<LlmConfig> {
        let s = &self.config.llm;
        let text = match &s.template {
            Some(p) => {
                let p = self.config.resolve(p);
                std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?
            }
            None => DEFAULT_TEMPLATE.to_string(),
        };
        let mut config = LlmConfig::new(s.model_id.clone());
        config.template = PromptTemplate::new(text, s.template_version.clone())?;
        config.max_in_flight = s.max_in_flight;
        config.retry = s.retry;
        config.policy = s.unknown_labels;
        config.fail_soft = s.fail_soft;
        Ok(config)
    }

    /// Generate the synthetic corpus into `<out>/synth/`, together with a
    /// `run.json` that points the other stages at it.
    pub fn synth(&self) -> Result<StageReport> {
        self.stage("synth", |dir, rec| {
            let (data, files) = synth::generate(&self.config.synth, dir)?;
            let run = RunConfig {
                tweets: Some("tweets.csv".into()),
                prices: Some("prices.csv".into()),
                taxonomy: Some("taxonomy.txt".into()),
                lexicon: Some("lexicon.csv".into()),
                keywords: Some("keywords.csv".into()),
                cache: None,
                out: "..".into(),
                workers: None,
                base: PathBuf::new(),
                ..self.config.clone()
            };
            let mut text = serde_json::to_string_pretty(&run)?;
            text.push('\n');
            rec.outputs.push(write_text(&dir.join("run.json"), &text)?);
            rec.outputs.extend([
                files.tweets,
                files.prices,
                files.manifest,
                files.taxonomy,
                files.lexicon,
                files.keywords,
            ]);
            rec.count("tweets", data.tweets.len());
            rec.count("tickers", data.prices.len());
            rec.count("planted_occurrences", data.manifest.len());
            Ok(())
        })
    }

    pub fn ingest(&self) -> Result<StageReport> {
        self.stage("ingest", |dir, rec| {
            let tweets_path = self.configured(&self.config.tweets, "tweets")?;
            let prices_path = self.configured(&self.config.prices, "prices")?;
            rec.input("tweets", &tweets_path);
            rec.input("prices", &prices_path);
            let load = load_tweets(&tweets_path, self.config.load_mode)?;
            let prices = load_prices(&prices_path)?;
            let (returns, too_short) = compute_all_returns(&prices);
            let aligned = align_tweets_with_cutoff(&load.tweets, DayCutoff(self.config.day_cutoff_hour));
            let unpriced = load
                .tweets
                .iter()
                .filter(|t| !prices.contains_key(&t.ticker))
                .count();

            rec.outputs.push(write_buf(&dir.join("tweets.csv"), |b| write_tweets(b, &load.tweets))?);
            rec.outputs.push(write_buf(&dir.join("alignment.csv"), |b| write_alignment(b, &aligned))?);
            rec.outputs.push(write_buf(&dir.join("prices.csv"), |b| write_prices(b, &prices))?);
            rec.outputs.push(write_buf(&dir.join("returns.csv"), |b| write_returns(b, &returns))?);
            rec.count("tweets", load.tweets.len());
            rec.count("dropped_rows", load.dropped);
            rec.count("tickers", prices.len());
            rec.count("series_too_short", too_short);
            rec.count("tweets_without_prices", unpriced);
            Ok(())
        })
    }

    /// Annotate with the configured backend; `llm` talks HTTP to the
    /// endpoint named in the environment.
    pub fn annotate(&self) -> Result<StageReport> {
        if self.config.backend == Backend::Llm {
            let timeout = Duration::from_millis(self.config.llm.timeout_ms);
            let transport = HttpTransport::from_env(timeout).map_err(|e| e.in_stage("annotate"))?;
            self.annotate_with(&transport)
        } else {
            self.annotate_with(&NoTransport)
        }
    }

    /// As [`Pipeline::annotate`], with an explicit transport for `llm`.
    pub fn annotate_with(&self, transport: &dyn Transport) -> Result<StageReport> {
        self.stage("annotate", |dir, rec| {
            let tweets_path = self.upstream("ingest", "tweets.csv")?;
            rec.input("tweets", &tweets_path);
            let tweets = load_tweets(&tweets_path, LoadMode::Strict)?.tweets;
            let taxonomy = self.taxonomy(rec)?;
            let lexicon = self.lexicon(rec)?;
            let annotations = match self.config.backend {
                Backend::Mock => {
                    let keywords = self.keywords(&taxonomy, rec)?;
                    annotate_mock(&tweets, &lexicon, &keywords)
                }
                Backend::Llm => {
                    let path = self.cache_path();
                    let mut cache = AnnotationCache::open(&path)?;
                    let config = self.llm_config()?;
                    let (annotations, stats) =
                        annotate_llm(&tweets, &taxonomy, &lexicon, transport, &config, &mut cache)?;
                    rec.count("cache_hits", stats.cache_hits);
                    rec.count("requests", stats.requests);
                    rec.count("failures", stats.failures);
                    rec.count("cache_writes", stats.cache_writes);
                    annotations
                }
                Backend::Replay => {
                    let path = self.cache_path();
                    let cache = if path.exists() {
                        rec.input("cache", &path);
                        AnnotationCache::open(&path)?
                    } else {
                        AnnotationCache::in_memory()
                    };
                    annotate_replay(&tweets, &taxonomy, &lexicon, &self.llm_config()?, &cache)?
                }
            };
            let labelled = annotations.iter().filter(|a| !a.labels.is_empty()).count();
            rec.outputs.push(write_buf(&dir.join("annotations.csv"), |b| {
                write_annotations(b, &annotations)
            })?);
            rec.count("annotations", annotations.len());
            rec.count("labelled", labelled);
            Ok(())
        })
    }

    pub fn factors(&self) -> Result<StageReport> {
        self.stage("factors", |dir, rec| {
            let tweets_path = self.upstream("ingest", "tweets.csv")?;
            let align_path = self.upstream("ingest", "alignment.csv")?;
            let prices_path = self.upstream("ingest", "prices.csv")?;
            let ann_path = self.upstream("annotate", "annotations.csv")?;
            for (name, p) in [
                ("tweets", &tweets_path),
                ("alignment", &align_path),
                ("prices", &prices_path),
                ("annotations", &ann_path),
            ] {
                rec.input(name, p);
            }
            let taxonomy = self.taxonomy(rec)?;
            let tweets = load_tweets(&tweets_path, LoadMode::Strict)?.tweets;
            let dates = read_alignment(&align_path)?;
            let annotations = read_annotations(&ann_path, &taxonomy)?;
            let prices = load_prices(&prices_path)?;

            let mut unaligned = 0;
            let aligned: Vec<AlignedTweet> = tweets
                .into_iter()
                .filter_map(|t| match dates.get(&t.id) {
                    Some(&d) => Some(AlignedTweet {
                        tweet: t,
                        trading_date: d,
                    }),
                    None => {
                        unaligned += 1;
                        None
                    }
                })
                .collect();
            let by_id: HashMap<&str, &AlignedTweet> =
                aligned.iter().map(|a| (a.tweet.id.as_str(), a)).collect();
            let mut unmatched = 0;
            let mut pairs = Vec::with_capacity(annotations.len());
            for a in &annotations {
                match by_id.get(a.tweet_id.as_str()) {
                    Some(t) => pairs.push((*t, a)),
                    None => unmatched += 1,
                }
            }
            let before = pairs.len();
            let pairs = filter_intensity(pairs, self.config.intensity_threshold);
            let below = before - pairs.len();
            let panel = build_exposures(&pairs, self.config.attribution);
            let horizons = self.config.horizons();
            let join = event_samples(&panel, &prices, &horizons);

            rec.outputs.push(write_buf(&dir.join("panel.csv"), |b| write_panel(b, &panel))?);
            rec.outputs.push(write_buf(&dir.join("samples.csv"), |b| {
                write_samples(b, &join.samples, &horizons)
            })?);
            rec.count("tweets_unaligned", unaligned);
            rec.count("annotations_unmatched", unmatched);
            rec.count("below_intensity", below);
            rec.count("panel_cells", panel.len());
            rec.count("samples", join.samples.len());
            rec.count("orphans", join.orphans);
            rec.count("off_calendar", join.off_calendar);
            rec.count("no_forward", join.no_forward);
            Ok(())
        })
    }

    pub fn backtest(&self) -> Result<StageReport> {
        self.stage("backtest", |dir, rec| {
            let samples_path = self.upstream("factors", "samples.csv")?;
            let panel_path = self.upstream("factors", "panel.csv")?;
            let prices_path = self.upstream("ingest", "prices.csv")?;
            rec.input("samples", &samples_path);
            rec.input("panel", &panel_path);
            rec.input("prices", &prices_path);
            let taxonomy = self.taxonomy(rec)?;
            let (samples, sample_horizons) = read_samples(&samples_path, &taxonomy)?;
            let panel = read_panel(&panel_path, &taxonomy)?;
            let prices = load_prices(&prices_path)?;
            let horizons = self.config.horizons();
            if let Some(h) = horizons.iter().find(|h| !sample_horizons.contains(h)) {
                return Err(Error::ConfigInvalid(format!(
                    "horizon {h} is not in {}; rerun factors",
                    samples_path.display()
                )));
            }

            let mut plot = PlotData::default();
            let mut insufficient = 0;
            for &h in &horizons {
                let mut rows = Vec::new();
                for label in taxonomy.labels() {
                    let row = match event_study(&samples, label, h, self.config.position) {
                        Ok(study) => {
                            plot.curves.insert(format!("event_{}_{h}", slug(label)), event_curve(&study)?);
                            study_metrics(&study, self.config.ic_mode)?
                        }
                        Err(Error::InsufficientSamples { .. }) => None,
                        Err(e) => return Err(e),
                    };
                    match &row {
                        Some(r) => rows.push(r.clone()),
                        None => insufficient += 1,
                    }
                    plot.results.push(LabelResult {
                        label: label.clone(),
                        horizon: h,
                        row,
                    });
                }
                let table = render_metrics_table(&rows, TableFormat::Csv);
                rec.outputs.push(write_text(&dir.join(format!("metrics_{h}.csv")), &table)?);

                let specs = [
                    SortSpec {
                        quantiles: self.config.long_short_quantiles,
                        ..SortSpec::long_short(h)
                    },
                    SortSpec {
                        quantiles: self.config.long_only_quantiles,
                        ..SortSpec::long_only(h)
                    },
                ];
                for spec in specs {
                    let series = portfolio_sort(&panel, &prices, &spec);
                    let name = spec.descriptor();
                    rec.count(format!("skipped_dates_{name}"), series.skipped_dates);
                    rec.count(format!("formations_{name}"), series.points.len());
                    if !series.points.is_empty() {
                        plot.curves.insert(name, equity_curve(&series.points, Compounding::LogSum)?);
                    }
                    plot.portfolios.push(series);
                }
            }
            let metrics = dir.join("metrics.json");
            write_metrics_json(&metrics, &plot.results)?;
            rec.outputs.push(metrics);
            rec.outputs.extend(emit_plot_data(&plot, dir)?);
            rec.count("samples", samples.len());
            rec.count("insufficient_rows", insufficient);
            Ok(())
        })
    }

    pub fn report(&self) -> Result<StageReport> {
        self.stage("report", |dir, rec| {
            let metrics = self.upstream("backtest", "metrics.json")?;
            rec.input("metrics", &metrics);
            let taxonomy = self.taxonomy(rec)?;
            let results = read_metrics_json(&metrics, &taxonomy)?;
            rec.outputs.push(write_text(&dir.join("report.md"), &render_report(&results))?);
            rec.count("rows", results.iter().filter(|r| r.row.is_some()).count());
            Ok(())
        })
    }

    /// `ingest` through `report`.
    pub fn run_all(&self) -> Result<Vec<StageReport>> {
        Ok(vec![
            self.ingest()?,
            self.annotate()?,
            self.factors()?,
            self.backtest()?,
            self.report()?,
        ])
    }
}

/// Stand-in transport for backends that never send requests.
struct NoTransport;

impl Transport for NoTransport {
    fn post(&self, _body: &str) -> std::result::Result<String, crate::annotation::TransportError> {
        Err(crate::annotation::TransportError::Fatal("no transport configured".into()))
    }
}
