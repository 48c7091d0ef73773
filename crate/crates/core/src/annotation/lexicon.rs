//! Lexicon tone scorer.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Lowercased term to tone weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    weights: BTreeMap<String, f64>,
}

impl Lexicon {
    pub fn new<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut weights = BTreeMap::new();
        for (term, w) in entries {
            let term = term.as_ref().trim().to_lowercase();
            if term.is_empty() {
                continue;
            }
            if !w.is_finite() {
                return Err(Error::ConfigInvalid(format!(
                    "lexicon weight for {term:?} is not finite"
                )));
            }
            if weights.insert(term.clone(), w).is_some() {
                return Err(Error::ConfigInvalid(format!(
                    "lexicon term {term:?} appears twice"
                )));
            }
        }
        if weights.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        Ok(Lexicon { weights })
    }

    /// A small general-purpose finance lexicon.
    pub fn finance_default() -> Self {
        Lexicon::new([
            ("bullish", 1.0),
            ("bearish", -1.0),
            ("buy", 0.5),
            ("sell", -0.5),
            ("long", 0.3),
            ("short", -0.3),
            ("moon", 0.8),
            ("crash", -0.9),
            ("surge", 0.7),
            ("plunge", -0.8),
            ("rally", 0.6),
            ("selloff", -0.7),
            ("beat", 0.5),
            ("miss", -0.5),
            ("upgrade", 0.6),
            ("downgrade", -0.6),
            ("strong", 0.4),
            ("weak", -0.4),
            ("gain", 0.4),
            ("loss", -0.4),
            ("profit", 0.5),
            ("record", 0.3),
            ("lawsuit", -0.6),
            ("fraud", -0.9),
            ("bankrupt", -1.0),
            ("scandal", -0.7),
            ("boycott", -0.6),
            ("backlash", -0.6),
        ])
        .expect("static lexicon is valid")
    }

    /// Load a `term,weight` CSV.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let term = rec.get(0).ok_or(Error::MissingField { field: "term", line })?;
            let w = rec.get(1).ok_or(Error::MissingField { field: "weight", line })?;
            let w: f64 = w.trim().parse().map_err(|_| Error::BadField {
                field: "weight",
                value: w.to_string(),
                line,
            })?;
            entries.push((term.to_string(), w));
        }
        Self::new(entries)
    }

    pub fn weight(&self, term: &str) -> Option<f64> {
        self.weights.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,weight\n");
        for (t, w) in &self.weights {
            out.push_str(&format!("{t},{w}\n"));
        }
        out
    }
}

/// Split on anything that is not alphanumeric, lowercasing each token.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Mean weight of matched tokens, clamped to `[-1, 1]`; 0 when nothing matches.
pub fn score_tone_lexicon(text: &str, lexicon: &Lexicon) -> f64 {
    // Per-term counts summed in term order make the result independent of
    // token order down to the last bit.
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for tok in tokenize(text) {
        if lexicon.weights.contains_key(&tok) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let matched: u32 = counts.values().sum();
    if matched == 0 {
        return 0.0;
    }
    let total: f64 = counts
        .iter()
        .map(|(t, &c)| lexicon.weights[t] * f64::from(c))
        .sum();
    (total / f64::from(matched)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex() -> Lexicon {
        Lexicon::new([("good", 1.0), ("bad", -1.0), ("moon", 3.0)]).unwrap()
    }

    #[test]
    fn mean_of_matched_weights() {
        let t = score_tone_lexicon("good good bad", &lex());
        assert!((t - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_match_is_neutral() {
        assert_eq!(score_tone_lexicon("earnings call at noon", &lex()), 0.0);
    }

    #[test]
    fn punctuation_and_case_split_tokens() {
        assert_eq!(score_tone_lexicon("GOOD!bad,good", &lex()), 1.0 / 3.0);
        assert_eq!(score_tone_lexicon("moon moon", &lex()), 1.0);
    }

    #[test]
    fn empty_lexicon_rejected() {
        assert!(matches!(
            Lexicon::new(Vec::<(String, f64)>::new()),
            Err(Error::EmptyLexicon)
        ));
    }

    // Independent re-implementation: collect matched weights, mean, clamp.
    fn naive(text: &str, entries: &[(&str, f64)]) -> f64 {
        let mut ws = Vec::new();
        for tok in text.split(|c: char| !c.is_alphanumeric()) {
            let tok = tok.to_lowercase();
            if let Some((_, w)) = entries.iter().find(|(t, _)| *t == tok) {
                ws.push(*w);
            }
        }
        if ws.is_empty() {
            0.0
        } else {
            (ws.iter().sum::<f64>() / ws.len() as f64).clamp(-1.0, 1.0)
        }
    }

    const WORDS: [&str; 8] = ["good", "bad", "great", "awful", "the", "stock", "moon", "dump"];

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn bounded_order_and_case_invariant(
            idx in prop::collection::vec(0usize..WORDS.len(), 0..30),
            weights in prop::array::uniform5(-3.0f64..3.0),
            seed in any::<u64>(),
        ) {
            let entries = [
                ("good", weights[0]), ("bad", weights[1]), ("great", weights[2]),
                ("awful", weights[3]), ("moon", weights[4]),
            ];
            let lexicon = Lexicon::new(entries).unwrap();
            let words: Vec<&str> = idx.iter().map(|&i| WORDS[i]).collect();
            let text = words.join(" ");
            let tone = score_tone_lexicon(&text, &lexicon);
            prop_assert!((-1.0..=1.0).contains(&tone));
            prop_assert!((tone - naive(&text, &entries)).abs() < 1e-12);

            let mut shuffled = words.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted = shuffled.join(" ").to_uppercase();
            prop_assert_eq!(score_tone_lexicon(&permuted, &lexicon).to_bits(), tone.to_bits());
        }
    }
}
