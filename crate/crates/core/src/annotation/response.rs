//! Parsing of annotation-service replies.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{clamp_tone, EventLabel, Taxonomy};
use crate::error::{Error, Result};

/// What to do with a label that is not in the taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownLabelPolicy {
    #[default]
    Drop,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub labels: BTreeSet<EventLabel>,
    pub tone: Option<f64>,
}

/// First JSON object in `raw` shaped like `{"labels": [string...], "tone": number?}`.
/// Leading or trailing prose is ignored.
pub fn parse_llm_response(
    raw: &str,
    taxonomy: &Taxonomy,
    policy: UnknownLabelPolicy,
) -> Result<ParsedResponse> {
    for (start, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        let Some(Ok(Value::Object(obj))) = stream.next() else {
            continue;
        };
        let Some(Value::Array(items)) = obj.get("labels") else {
            continue;
        };
        let Some(names) = items
            .iter()
            .map(Value::as_str)
            .collect::<Option<Vec<&str>>>()
        else {
            continue;
        };
        let tone = match obj.get("tone") {
            None | Some(Value::Null) => None,
            Some(Value::Number(n)) => n.as_f64().map(clamp_tone),
            Some(other) => {
                return Err(Error::MalformedResponse(format!(
                    "`tone` is not a number: {other}"
                )))
            }
        };

        let mut labels = BTreeSet::new();
        for name in names {
            match (taxonomy.get(name.trim()), policy) {
                (Some(l), _) => {
                    labels.insert(l);
                }
                (None, UnknownLabelPolicy::Drop) => {
                    tracing::debug!(label = name, "dropping label outside taxonomy");
                }
                (None, UnknownLabelPolicy::Error) => {
                    return Err(Error::UnknownLabel(name.to_string()))
                }
            }
        }
        return Ok(ParsedResponse { labels, tone });
    }
    let preview: String = raw.chars().take(120).collect();
    Err(Error::MalformedResponse(format!(
        "no {{\"labels\": [...]}} object in {preview:?}"
    )))
}
