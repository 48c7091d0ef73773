//! Append-only JSON-lines cache of annotation-service results.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub tweet_id: String,
    pub prompt_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tone: Option<f64>,
    pub labels: Vec<String>,
    pub model_id: String,
}

/// Hex SHA-256 of model id, template version and tweet text, joined by the
/// ASCII unit separator.
pub fn prompt_hash(model_id: &str, template_version: &str, tweet_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(model_id.as_bytes());
    h.update([0x1f]);
    h.update(template_version.as_bytes());
    h.update([0x1f]);
    h.update(tweet_text.as_bytes());
    hex::encode(h.finalize())
}

/// One writer at a time; entries are keyed by `(tweet_id, prompt_hash)`.
#[derive(Debug)]
pub struct AnnotationCache {
    path: Option<PathBuf>,
    entries: HashMap<(String, String), CacheEntry>,
    journal: Option<File>,
    appended: usize,
}

impl AnnotationCache {
    /// Cache that lives only for this process.
    pub fn in_memory() -> Self {
        AnnotationCache {
            path: None,
            entries: HashMap::new(),
            journal: None,
            appended: 0,
        }
    }

    /// Open (or create) a journal. A corrupt final line is truncated away;
    /// corruption anywhere else is an error.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let mut reader = BufReader::new(file);
            let mut good_len: u64 = 0;
            let mut buf = String::new();
            let mut line_no = 0;
            let mut bad_line: Option<usize> = None;
            loop {
                buf.clear();
                let n = reader.read_line(&mut buf).map_err(|e| Error::io(path, e))?;
                if n == 0 {
                    break;
                }
                line_no += 1;
                if let Some(bad) = bad_line {
                    return Err(Error::CorruptCache {
                        path: path.to_path_buf(),
                        line: bad,
                    });
                }
                let complete = buf.ends_with('\n');
                let body = buf.trim_end_matches(['\n', '\r']);
                if body.trim().is_empty() && complete {
                    good_len += n as u64;
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(body) {
                    Ok(entry) if complete => {
                        good_len += n as u64;
                        entries
                            .entry((entry.tweet_id.clone(), entry.prompt_hash.clone()))
                            .or_insert(entry);
                    }
                    _ => bad_line = Some(line_no),
                }
            }
            if let Some(line) = bad_line {
                tracing::warn!(path = %path.display(), line, "truncating corrupt trailing cache line");
                let f = OpenOptions::new()
                    .write(true)
                    .open(path)
                    .map_err(|e| Error::io(path, e))?;
                f.set_len(good_len).map_err(|e| Error::io(path, e))?;
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let journal = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(AnnotationCache {
            path: Some(path.to_path_buf()),
            entries,
            journal: Some(journal),
            appended: 0,
        })
    }

    pub fn get(&self, tweet_id: &str, prompt_hash: &str) -> Option<&CacheEntry> {
        self.entries
            .get(&(tweet_id.to_string(), prompt_hash.to_string()))
    }

    /// Append unless the key is already present. Returns whether it was written.
    pub fn insert(&mut self, entry: CacheEntry) -> Result<bool> {
        let key = (entry.tweet_id.clone(), entry.prompt_hash.clone());
        if self.entries.contains_key(&key) {
            return Ok(false);
        }
        if let Some(journal) = self.journal.as_mut() {
            let mut line = serde_json::to_string(&entry)?;
            line.push('\n');
            let path = self.path.clone().unwrap_or_default();
            journal
                .write_all(line.as_bytes())
                .and_then(|_| journal.flush())
                .map_err(|e| Error::io(path, e))?;
        }
        self.entries.insert(key, entry);
        self.appended += 1;
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries written through this handle since it was opened.
    pub fn appended(&self) -> usize {
        self.appended
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str) -> CacheEntry {
        CacheEntry {
            tweet_id: id.into(),
            prompt_hash: prompt_hash("m", "v1", id),
            tone: Some(0.5),
            labels: vec!["Brand Boycott".into()],
            model_id: "m".into(),
        }
    }

    #[test]
    fn hash_depends_on_every_component() {
        let base = prompt_hash("m", "v1", "text");
        assert_eq!(base.len(), 64);
        assert_ne!(base, prompt_hash("m2", "v1", "text"));
        assert_ne!(base, prompt_hash("m", "v2", "text"));
        assert_ne!(base, prompt_hash("m", "v1", "text!"));
        assert_ne!(prompt_hash("ab", "c", "d"), prompt_hash("a", "bc", "d"));
    }

    #[test]
    fn reopen_sees_previous_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let mut c = AnnotationCache::open(&path).unwrap();
            assert!(c.insert(entry("a")).unwrap());
            assert!(!c.insert(entry("a")).unwrap());
            assert!(c.insert(entry("b")).unwrap());
        }
        let c = AnnotationCache::open(&path).unwrap();
        assert_eq!(c.len(), 2);
        let e = entry("b");
        assert_eq!(c.get("b", &e.prompt_hash), Some(&e));
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn corrupt_trailing_line_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let good = serde_json::to_string(&entry("a")).unwrap();
        std::fs::write(&path, format!("{good}\n{{\"tweet_id\":\"b\",\"prom")).unwrap();
        let mut c = AnnotationCache::open(&path).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{good}\n"));
        c.insert(entry("b")).unwrap();
        drop(c);
        assert_eq!(AnnotationCache::open(&path).unwrap().len(), 2);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let good = serde_json::to_string(&entry("a")).unwrap();
        std::fs::write(&path, format!("garbage\n{good}\n")).unwrap();
        assert!(matches!(
            AnnotationCache::open(&path),
            Err(Error::CorruptCache { line: 1, .. })
        ));
    }
}
