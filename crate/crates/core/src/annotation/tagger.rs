//! Keyword tagger: a deterministic stand-in for model-based event tagging.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::domain::{EventLabel, Taxonomy, Tweet};
use crate::error::{Error, Result};

/// Event label to trigger keywords (stored lowercased).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordMap {
    keywords: BTreeMap<EventLabel, Vec<String>>,
}

impl KeywordMap {
    pub fn new<I, L, K>(taxonomy: &Taxonomy, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (L, K)>,
        L: AsRef<str>,
        K: IntoIterator,
        K::Item: AsRef<str>,
    {
        let mut keywords: BTreeMap<EventLabel, Vec<String>> = BTreeMap::new();
        for (label, kws) in entries {
            let label = taxonomy
                .get(label.as_ref())
                .ok_or_else(|| Error::UnknownLabelInMap(label.as_ref().to_string()))?;
            let slot = keywords.entry(label).or_default();
            for kw in kws {
                let kw = kw.as_ref().trim().to_lowercase();
                if !kw.is_empty() && !slot.contains(&kw) {
                    slot.push(kw);
                }
            }
        }
        Ok(KeywordMap { keywords })
    }

    /// Load a `label,keyword` CSV (one keyword per row).
    pub fn load(path: &Path, taxonomy: &Taxonomy) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut rows: Vec<(String, Vec<String>)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let label = rec.get(0).ok_or(Error::MissingField { field: "label", line })?;
            let kw = rec.get(1).ok_or(Error::MissingField { field: "keyword", line })?;
            rows.push((label.trim().to_string(), vec![kw.to_string()]));
        }
        Self::new(taxonomy, rows)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "keyword"]).expect("in-memory write");
        for (label, kws) in &self.keywords {
            for kw in kws {
                w.write_record([label.as_str(), kw.as_str()]).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EventLabel, &[String])> {
        self.keywords.iter().map(|(l, k)| (l, k.as_slice()))
    }
}

/// Labels whose keywords occur (case-insensitively, as substrings) in the text.
pub fn tag_events_mock(tweet: &Tweet, map: &KeywordMap) -> BTreeSet<EventLabel> {
    let text = tweet.text.to_lowercase();
    map.keywords
        .iter()
        .filter(|(_, kws)| kws.iter().any(|k| text.contains(k.as_str())))
        .map(|(l, _)| l.clone())
        .collect()
}
