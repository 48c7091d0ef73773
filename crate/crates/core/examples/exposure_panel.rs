//! Aggregate annotated tweets into a (ticker, day, label) exposure panel
//! and join it with forward returns.

use std::error::Error;

use eventalpha::domain::{
    parse_timestamp, validate_price_series, Annotation, Horizon, PriceBar, Taxonomy, Ticker,
    TradingDate, Tweet,
};
use eventalpha::factor::{build_exposures, event_samples, AttributionMode};
use eventalpha::ingestion::{align_tweets, PriceMap};

fn tweet(id: &str, ts: &str, ticker: &str) -> Tweet {
    Tweet {
        id: id.into(),
        timestamp: parse_timestamp(ts).expect("valid timestamp"),
        ticker: Ticker::new(ticker).expect("valid ticker"),
        text: String::new(),
    }
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let tax = Taxonomy::default_labels();
    let rumor = tax.label("Speculation/Rumor")?;
    let buzz = tax.label("Retail Investor Buzz")?;

    let tweets = vec![
        tweet("a", "2017-03-01T10:00:00Z", "AAPL"),
        tweet("b", "2017-03-01T16:30:00Z", "AAPL"),
        tweet("c", "2017-03-01T12:00:00Z", "MSFT"),
        tweet("d", "2017-03-02T12:00:00Z", "NOPE"),
    ];
    let annotations = vec![
        Annotation::new("a", -0.8, [rumor.clone(), buzz.clone()]),
        Annotation::new("b", -0.4, [rumor.clone()]),
        Annotation::new("c", 0.6, [buzz.clone()]),
        Annotation::new("d", 0.9, [rumor.clone()]),
    ];
    let aligned = align_tweets(&tweets);
    let pairs: Vec<_> = aligned.iter().zip(&annotations).collect();

    for mode in [AttributionMode::Proportional, AttributionMode::Duplicate] {
        let panel = build_exposures(&pairs, mode);
        println!("{mode:?} attribution:");
        for (k, c) in panel.iter() {
            println!(
                "  {} {} {:<22} exposure {:+.2} from {} tweet(s)",
                k.ticker, k.date, k.label.as_str(), c.exposure, c.tweet_count
            );
        }
    }

    let mut prices = PriceMap::new();
    for (sym, closes) in [("AAPL", [100.0, 98.0, 97.0]), ("MSFT", [50.0, 51.0, 52.0])] {
        let ticker = Ticker::new(sym).expect("valid ticker");
        let bars = closes
            .iter()
            .enumerate()
            .map(|(i, &close)| PriceBar {
                date: TradingDate::from_ymd(2017, 3, 1 + i as u32).expect("valid date"),
                close,
            })
            .collect();
        prices.insert(ticker.clone(), validate_price_series(ticker, bars)?);
    }
    let panel = build_exposures(&pairs, AttributionMode::Proportional);
    let horizons = [Horizon::new(1)?, Horizon::new(2)?];
    let join = event_samples(&panel, &prices, &horizons);
    println!("{} samples, {} orphan key(s) without prices", join.samples.len(), join.orphans);
    for s in &join.samples {
        println!("  {} {} {:<22} fwd {:?}", s.ticker, s.event_date, s.label.as_str(), s.fwd);
    }
    assert_eq!(join.orphans, 1);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
