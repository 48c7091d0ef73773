//! HTTP annotation client with retry, bounded concurrency and cache replay.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::cache::{prompt_hash, AnnotationCache, CacheEntry};
use super::lexicon::{score_tone_lexicon, Lexicon};
use super::prompt::{build_prompt, PromptTemplate};
use super::response::{parse_llm_response, UnknownLabelPolicy};
use crate::domain::{Annotation, Taxonomy, Tweet};
use crate::error::{Error, Result};

pub const ENV_LLM_URL: &str = "EVENTALPHA_LLM_URL";
pub const ENV_LLM_TOKEN: &str = "EVENTALPHA_LLM_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Connection failures, timeouts, 429 and 5xx.
    Retryable(String),
    Fatal(String),
}

/// Sends one JSON request body and returns the raw response body.
pub trait Transport: Sync {
    fn post(&self, body: &str) -> std::result::Result<String, TransportError>;
}

pub struct HttpTransport {
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        HttpTransport {
            url: url.into(),
            token,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    /// Endpoint and bearer token from `EVENTALPHA_LLM_URL` / `EVENTALPHA_LLM_TOKEN`.
    pub fn from_env(timeout: Duration) -> Result<Self> {
        let url = std::env::var(ENV_LLM_URL)
            .map_err(|_| Error::ConfigInvalid(format!("{ENV_LLM_URL} is not set")))?;
        let token = std::env::var(ENV_LLM_TOKEN).ok().filter(|t| !t.is_empty());
        Ok(Self::new(url, token, timeout))
    }
}

impl Transport for HttpTransport {
    fn post(&self, body: &str) -> std::result::Result<String, TransportError> {
        let mut req = self
            .agent
            .post(&self.url)
            .set("Content-Type", "application/json");
        if let Some(token) = &self.token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        match req.send_string(body) {
            Ok(resp) => resp
                .into_string()
                .map_err(|e| TransportError::Retryable(e.to_string())),
            Err(ureq::Error::Status(code, resp)) => {
                let msg = format!("HTTP {code}: {}", resp.into_string().unwrap_or_default());
                if code == 429 || code >= 500 {
                    Err(TransportError::Retryable(msg))
                } else {
                    Err(TransportError::Fatal(msg))
                }
            }
            Err(e) => Err(TransportError::Retryable(e.to_string())),
        }
    }
}

/// Exponential backoff: retry `k` (0-based) waits `base_delay * 2^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 4,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

pub(crate) fn send_with_retry(
    transport: &dyn Transport,
    body: &str,
    policy: &RetryPolicy,
) -> Result<String> {
    let mut retry = 0;
    loop {
        match transport.post(body) {
            Ok(text) => return Ok(text),
            Err(TransportError::Fatal(msg)) => return Err(Error::Network(msg)),
            Err(TransportError::Retryable(msg)) => {
                if retry >= policy.max_retries {
                    return Err(Error::Network(format!(
                        "giving up after {} attempts: {msg}",
                        retry + 1
                    )));
                }
                let delay = policy.delay(retry);
                tracing::warn!(attempt = retry + 1, ?delay, error = %msg, "retrying annotation request");
                std::thread::sleep(delay);
                retry += 1;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LlmConfig {
    pub model_id: String,
    pub template: PromptTemplate,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub policy: UnknownLabelPolicy,
    /// Failed tweets fall back to lexicon tone with no labels instead of aborting.
    pub fail_soft: bool,
}

impl LlmConfig {
    pub fn new(model_id: impl Into<String>) -> Self {
        LlmConfig {
            model_id: model_id.into(),
            template: PromptTemplate::default(),
            max_in_flight: 8,
            retry: RetryPolicy::default(),
            policy: UnknownLabelPolicy::Drop,
            fail_soft: false,
        }
    }

    fn hash_for(&self, tweet: &Tweet) -> String {
        prompt_hash(&self.model_id, self.template.version(), &tweet.text)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AnnotateStats {
    pub cache_hits: usize,
    pub requests: usize,
    pub failures: usize,
    pub cache_writes: usize,
}

/// Tweets per batch; cache entries of a batch are appended in input order.
const BATCH: usize = 64;

fn from_entry(
    tweet: &Tweet,
    entry: &CacheEntry,
    taxonomy: &Taxonomy,
    lexicon: &Lexicon,
) -> Annotation {
    let labels = entry.labels.iter().filter_map(|l| taxonomy.get(l));
    let tone = entry
        .tone
        .unwrap_or_else(|| score_tone_lexicon(&tweet.text, lexicon));
    Annotation::new(tweet.id.clone(), tone, labels)
}

/// Annotate via the remote model. Cached tweets issue no request; output is
/// in input order whatever the completion order.
pub fn annotate_llm(
    tweets: &[Tweet],
    taxonomy: &Taxonomy,
    lexicon: &Lexicon,
    transport: &dyn Transport,
    config: &LlmConfig,
    cache: &mut AnnotationCache,
) -> Result<(Vec<Annotation>, AnnotateStats)> {
    let mut stats = AnnotateStats::default();
    let mut out: Vec<Option<Annotation>> = vec![None; tweets.len()];
    let mut misses = Vec::new();
    for (i, t) in tweets.iter().enumerate() {
        match cache.get(&t.id, &config.hash_for(t)) {
            Some(entry) => {
                out[i] = Some(from_entry(t, entry, taxonomy, lexicon));
                stats.cache_hits += 1;
            }
            None => misses.push(i),
        }
    }

    for batch in misses.chunks(BATCH) {
        let results = request_batch(tweets, batch, taxonomy, transport, config);
        stats.requests += batch.len();
        for (&i, result) in batch.iter().zip(results) {
            let tweet = &tweets[i];
            match result {
                Ok(entry) => {
                    out[i] = Some(from_entry(tweet, &entry, taxonomy, lexicon));
                    if cache.insert(entry)? {
                        stats.cache_writes += 1;
                    }
                }
                Err(e) if config.fail_soft => {
                    tracing::warn!(tweet = %tweet.id, error = %e, "annotation failed; using lexicon tone");
                    stats.failures += 1;
                    out[i] = Some(Annotation::new(
                        tweet.id.clone(),
                        score_tone_lexicon(&tweet.text, lexicon),
                        [],
                    ));
                }
                Err(e) => return Err(e),
            }
        }
    }
    if stats.failures > 0 {
        tracing::warn!(failures = stats.failures, "annotation failures");
    }
    Ok((out.into_iter().map(|a| a.expect("every slot filled")).collect(), stats))
}

fn request_batch(
    tweets: &[Tweet],
    batch: &[usize],
    taxonomy: &Taxonomy,
    transport: &dyn Transport,
    config: &LlmConfig,
) -> Vec<Result<CacheEntry>> {
    let slots: Vec<Mutex<Option<Result<CacheEntry>>>> =
        batch.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.max_in_flight.clamp(1, batch.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= batch.len() {
                    break;
                }
                let result = request_one(&tweets[batch[k]], taxonomy, transport, config);
                *slots[k].lock().expect("slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("slot filled"))
        .collect()
}

fn request_one(
    tweet: &Tweet,
    taxonomy: &Taxonomy,
    transport: &dyn Transport,
    config: &LlmConfig,
) -> Result<CacheEntry> {
    let prompt = build_prompt(&config.template, taxonomy.labels(), tweet)?;
    let body = serde_json::json!({ "model": config.model_id, "prompt": prompt }).to_string();
    let raw = send_with_retry(transport, &body, &config.retry)?;
    let parsed = parse_llm_response(&raw, taxonomy, config.policy)?;
    Ok(CacheEntry {
        tweet_id: tweet.id.clone(),
        prompt_hash: config.hash_for(tweet),
        tone: parsed.tone,
        labels: parsed.labels.iter().map(|l| l.as_str().to_string()).collect(),
        model_id: config.model_id.clone(),
    })
}

/// Cache-only annotation; the first uncached tweet is an error.
pub fn annotate_replay(
    tweets: &[Tweet],
    taxonomy: &Taxonomy,
    lexicon: &Lexicon,
    config: &LlmConfig,
    cache: &AnnotationCache,
) -> Result<Vec<Annotation>> {
    tweets
        .iter()
        .map(|t| {
            cache
                .get(&t.id, &config.hash_for(t))
                .map(|e| from_entry(t, e, taxonomy, lexicon))
                .ok_or_else(|| Error::UncachedTweet {
                    tweet_id: t.id.clone(),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{parse_timestamp, Ticker};
    use std::sync::atomic::AtomicUsize;

    struct Scripted {
        calls: AtomicUsize,
        fail_first: usize,
        reply: String,
    }

    impl Transport for Scripted {
        fn post(&self, _body: &str) -> std::result::Result<String, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(TransportError::Retryable("HTTP 429".into()))
            } else {
                Ok(self.reply.clone())
            }
        }
    }

    struct Fatal;

    impl Transport for Fatal {
        fn post(&self, _body: &str) -> std::result::Result<String, TransportError> {
            Err(TransportError::Fatal("HTTP 401".into()))
        }
    }

    fn tweet(id: &str, text: &str) -> Tweet {
        Tweet {
            id: id.into(),
            timestamp: parse_timestamp("2017-03-01T14:00:00Z").unwrap(),
            ticker: Ticker::new("AAPL").unwrap(),
            text: text.into(),
        }
    }

    fn quick_config() -> LlmConfig {
        let mut c = LlmConfig::new("mock-model");
        c.retry.base_delay = Duration::from_millis(1);
        c
    }

    fn lexicon() -> Lexicon {
        Lexicon::new([("good", 1.0), ("bad", -1.0)]).unwrap()
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        let ds: Vec<u64> = (0..4).map(|k| p.delay(k).as_secs()).collect();
        assert_eq!(ds, [1, 2, 4, 8]);
    }

    #[test]
    fn retries_then_succeeds() {
        let t = Scripted {
            calls: AtomicUsize::new(0),
            fail_first: 2,
            reply: "{\"labels\":[]}".into(),
        };
        assert!(send_with_retry(&t, "{}", &quick_config().retry).is_ok());
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn retry_budget_exhausted() {
        let t = Scripted {
            calls: AtomicUsize::new(0),
            fail_first: usize::MAX,
            reply: String::new(),
        };
        let err = send_with_retry(&t, "{}", &quick_config().retry).unwrap_err();
        assert!(matches!(err, Error::Network(_)));
        assert_eq!(t.calls.load(Ordering::SeqCst), 5);
    }

    #[test]
    fn fatal_status_is_not_retried() {
        assert!(matches!(
            send_with_retry(&Fatal, "{}", &quick_config().retry),
            Err(Error::Network(_))
        ));
    }

    #[test]
    fn fail_soft_uses_lexicon_tone() {
        let tax = Taxonomy::default_labels();
        let mut config = quick_config();
        config.fail_soft = true;
        let mut cache = AnnotationCache::in_memory();
        let (anns, stats) = annotate_llm(
            &[tweet("a", "good good")],
            &tax,
            &lexicon(),
            &Fatal,
            &config,
            &mut cache,
        )
        .unwrap();
        assert_eq!(anns[0].tone(), 1.0);
        assert!(anns[0].labels.is_empty());
        assert_eq!(stats.failures, 1);
        assert!(cache.is_empty());

        config.fail_soft = false;
        assert!(annotate_llm(&[tweet("a", "x")], &tax, &lexicon(), &Fatal, &config, &mut cache).is_err());
    }

    #[test]
    fn missing_tone_falls_back_to_lexicon() {
        let tax = Taxonomy::default_labels();
        let t = Scripted {
            calls: AtomicUsize::new(0),
            fail_first: 0,
            reply: "sure: {\"labels\":[\"Negative Press\"]}".into(),
        };
        let mut cache = AnnotationCache::in_memory();
        let (anns, stats) =
            annotate_llm(&[tweet("a", "bad news")], &tax, &lexicon(), &t, &quick_config(), &mut cache)
                .unwrap();
        assert_eq!(anns[0].tone(), -1.0);
        assert_eq!(anns[0].labels.len(), 1);
        assert_eq!(stats.requests, 1);
        assert_eq!(stats.cache_writes, 1);
    }

    #[test]
    fn replay_requires_warm_cache() {
        let tax = Taxonomy::default_labels();
        let cache = AnnotationCache::in_memory();
        let err = annotate_replay(&[tweet("zz", "x")], &tax, &lexicon(), &quick_config(), &cache)
            .unwrap_err();
        assert!(matches!(err, Error::UncachedTweet { tweet_id } if tweet_id == "zz"));
    }
}
