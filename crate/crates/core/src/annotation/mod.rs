//! Per-tweet net tone and event labels.
//!
//! Three backends produce [`Annotation`]s:
//! - `mock`: lexicon tone plus keyword tagging, fully offline;
//! - `llm`: a remote model over HTTP, with an on-disk cache;
//! - `replay`: the cache alone, failing on the first uncached tweet.

mod cache;
mod client;
mod lexicon;
mod prompt;
mod response;
mod tagger;

use std::io::Write;
use std::path::Path;

pub use cache::{prompt_hash, AnnotationCache, CacheEntry};
pub use client::{
    annotate_llm, annotate_replay, AnnotateStats, HttpTransport, LlmConfig, RetryPolicy,
    Transport, TransportError, ENV_LLM_TOKEN, ENV_LLM_URL,
};
pub use lexicon::{score_tone_lexicon, tokenize, Lexicon};
pub use prompt::{build_prompt, PromptTemplate, DEFAULT_TEMPLATE};
pub use response::{parse_llm_response, ParsedResponse, UnknownLabelPolicy};
pub use tagger::{tag_events_mock, KeywordMap};

use crate::domain::{Annotation, Taxonomy, Tweet, LABEL_SEPARATOR};
use crate::error::{Error, Result};

/// Offline backend: lexicon tone and keyword labels.
pub fn annotate_mock(tweets: &[Tweet], lexicon: &Lexicon, keywords: &KeywordMap) -> Vec<Annotation> {
    tweets
        .iter()
        .map(|t| {
            Annotation::new(
                t.id.clone(),
                score_tone_lexicon(&t.text, lexicon),
                tag_events_mock(t, keywords),
            )
        })
        .collect()
}

/// `tweet_id,tone,labels` with labels sorted and joined by `|`.
pub fn write_annotations<W: Write>(out: W, annotations: &[Annotation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::csv("<annotations>", e);
    w.write_record(["tweet_id", "tone", "labels"]).map_err(wrap)?;
    let sep = LABEL_SEPARATOR.to_string();
    for a in annotations {
        let labels: Vec<&str> = a.labels.iter().map(|l| l.as_str()).collect();
        w.write_record([a.tweet_id.clone(), a.tone().to_string(), labels.join(&sep)])
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<annotations>", e))
}

pub fn read_annotations(path: &Path, taxonomy: &Taxonomy) -> Result<Vec<Annotation>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = rec.get(0).ok_or(Error::MissingField { field: "tweet_id", line })?;
        let tone_s = rec.get(1).ok_or(Error::MissingField { field: "tone", line })?;
        let tone: f64 = tone_s.parse().map_err(|_| Error::BadField {
            field: "tone",
            value: tone_s.to_string(),
            line,
        })?;
        let labels = rec
            .get(2)
            .unwrap_or("")
            .split(LABEL_SEPARATOR)
            .filter(|s| !s.is_empty())
            .map(|s| taxonomy.label(s))
            .collect::<Result<Vec<_>>>()?;
        out.push(Annotation::new(id, tone, labels));
    }
    Ok(out)
}
