//! Offline annotation: lexicon tone scores and keyword event tags.

use std::error::Error;

use eventalpha::annotation::{annotate_mock, score_tone_lexicon, KeywordMap, Lexicon};
use eventalpha::domain::{parse_timestamp, Taxonomy, Ticker, Tweet};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let lexicon = Lexicon::new([("bullish", 1.0), ("surge", 0.6), ("bearish", -1.0), ("crash", -0.9)])?;
    let taxonomy = Taxonomy::default_labels();
    let keywords = KeywordMap::new(
        &taxonomy,
        [
            ("Speculation/Rumor", vec!["rumor", "takeover talk"]),
            ("Brand Boycott", vec!["boycott"]),
        ],
    )?;

    let texts = [
        "Bullish! bullish, SURGE incoming",
        "Takeover talk again... bearish on the price though",
        "Customers boycott the store; shares crash on rumor",
        "nothing to see",
    ];
    let tweets: Vec<Tweet> = texts
        .iter()
        .enumerate()
        .map(|(i, text)| Tweet {
            id: format!("t{i}"),
            timestamp: parse_timestamp("2017-05-04T15:00:00Z").expect("valid timestamp"),
            ticker: Ticker::new("XYZ").expect("valid ticker"),
            text: text.to_string(),
        })
        .collect();

    for (tweet, ann) in tweets.iter().zip(annotate_mock(&tweets, &lexicon, &keywords)) {
        let labels: Vec<&str> = ann.labels.iter().map(|l| l.as_str()).collect();
        println!("{:+.2} {:?} <- {:?}", ann.tone(), labels, tweet.text);
    }

    // Scores depend on token counts only, never on token order.
    let a = score_tone_lexicon("crash bullish surge", &lexicon);
    let b = score_tone_lexicon("surge CRASH bullish", &lexicon);
    assert_eq!(a.to_bits(), b.to_bits());
    assert_eq!(score_tone_lexicon("bullish bullish", &lexicon), 1.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
