//! Prompt templates for model-based annotation.

use crate::domain::{EventLabel, Tweet};
use crate::error::{Error, Result};

pub const TAXONOMY_PLACEHOLDER: &str = "{taxonomy}";
pub const TWEET_PLACEHOLDER: &str = "{tweet_text}";

pub const DEFAULT_TEMPLATE: &str = "You label finance tweets with market-relevant event types.\n\
Choose every applicable label from this list (or none):\n\
{taxonomy}\n\
Also rate the net tone of the tweet from -1 (very negative) to 1 (very positive).\n\
Reply with one JSON object: {\"labels\": [...], \"tone\": number}.\n\
Tweet: {tweet_text}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
    version: String,
}

impl PromptTemplate {
    /// Both placeholders must occur exactly once.
    pub fn new(text: impl Into<String>, version: impl Into<String>) -> Result<Self> {
        let text = text.into();
        for ph in [TAXONOMY_PLACEHOLDER, TWEET_PLACEHOLDER] {
            if text.matches(ph).count() != 1 {
                return Err(Error::MissingPlaceholder(ph));
            }
        }
        Ok(PromptTemplate {
            text,
            version: version.into(),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn version(&self) -> &str {
        &self.version
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::new(DEFAULT_TEMPLATE, "v1").expect("default template is well-formed")
    }
}

/// Substitute the taxonomy (one label per line) and the tweet text in a
/// single left-to-right pass, so placeholder-like text inside the tweet is
/// left alone.
pub fn build_prompt(template: &PromptTemplate, taxonomy: &[EventLabel], tweet: &Tweet) -> Result<String> {
    if taxonomy.is_empty() {
        return Err(Error::EmptyTaxonomy);
    }
    let rendered: Vec<&str> = taxonomy.iter().map(EventLabel::as_str).collect();
    let rendered = rendered.join("\n");

    let text = template.text();
    let tax_at = text
        .find(TAXONOMY_PLACEHOLDER)
        .ok_or(Error::MissingPlaceholder(TAXONOMY_PLACEHOLDER))?;
    let tweet_at = text
        .find(TWEET_PLACEHOLDER)
        .ok_or(Error::MissingPlaceholder(TWEET_PLACEHOLDER))?;

    let mut parts = [
        (tax_at, TAXONOMY_PLACEHOLDER.len(), rendered.as_str()),
        (tweet_at, TWEET_PLACEHOLDER.len(), tweet.text.as_str()),
    ];
    parts.sort_by_key(|p| p.0);

    let mut out = String::with_capacity(text.len() + rendered.len() + tweet.text.len());
    let mut cursor = 0;
    for (at, len, value) in parts {
        out.push_str(&text[cursor..at]);
        out.push_str(value);
        cursor = at + len;
    }
    out.push_str(&text[cursor..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{parse_timestamp, Taxonomy, Ticker};

    fn tweet(text: &str) -> Tweet {
        Tweet {
            id: "t".into(),
            timestamp: parse_timestamp("2017-03-01T14:00:00Z").unwrap(),
            ticker: Ticker::new("AAPL").unwrap(),
            text: text.into(),
        }
    }

    #[test]
    fn substitutes_both_placeholders() {
        let tax = Taxonomy::new(["Brand Boycott", "Negative Press"]).unwrap();
        let tpl = PromptTemplate::new("Labels:\n{taxonomy}\nTweet: {tweet_text}", "t1").unwrap();
        let p = build_prompt(&tpl, tax.labels(), &tweet("boycott $AAPL")).unwrap();
        assert_eq!(p, "Labels:\nBrand Boycott\nNegative Press\nTweet: boycott $AAPL");
        let again = build_prompt(&tpl, tax.labels(), &tweet("boycott $AAPL")).unwrap();
        assert_eq!(p.as_bytes(), again.as_bytes());
    }

    #[test]
    fn placeholder_order_can_be_reversed() {
        let tax = Taxonomy::new(["A"]).unwrap();
        let tpl = PromptTemplate::new("{tweet_text} | {taxonomy}", "t1").unwrap();
        let p = build_prompt(&tpl, tax.labels(), &tweet("see {taxonomy}")).unwrap();
        assert_eq!(p, "see {taxonomy} | A");
    }

    #[test]
    fn missing_or_repeated_placeholder() {
        assert!(matches!(
            PromptTemplate::new("Tweet: {tweet_text}", "t"),
            Err(Error::MissingPlaceholder(TAXONOMY_PLACEHOLDER))
        ));
        assert!(matches!(
            PromptTemplate::new("{taxonomy} {tweet_text} {tweet_text}", "t"),
            Err(Error::MissingPlaceholder(TWEET_PLACEHOLDER))
        ));
    }

    #[test]
    fn empty_taxonomy_rejected() {
        let tpl = PromptTemplate::default();
        assert!(matches!(build_prompt(&tpl, &[], &tweet("x")), Err(Error::EmptyTaxonomy)));
    }
}
