//! Load a tweet corpus and a price file, map tweets to trading days and
//! compute daily and forward log returns.

use std::error::Error;

use eventalpha::domain::{Horizon, Ticker, TradingDate};
use eventalpha::ingestion::{
    align_tweets, compute_log_returns, forward_return, load_prices, load_tweets, LoadMode,
};

const TWEETS: &str = "\
id,timestamp,ticker,text
1,2017-03-01T14:05:00Z,AAPL,Rumor of a buyout
2,2017-03-01T23:59:59Z,aapl,late post
3,not-a-time,MSFT,broken row
4,2017-03-02T09:00:00+02:00,MSFT,steady quarter
";

const PRICES: &str = "\
date,ticker,close,volume
2017-03-01,AAPL,100.0,10
2017-03-02,AAPL,110.0,12
2017-03-03,AAPL,99.0,9
2017-03-01,MSFT,50,1
2017-03-02,MSFT,51,1
2017-03-03,MSFT,52,1
";

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let tweets_path = dir.path().join("tweets.csv");
    let prices_path = dir.path().join("prices.csv");
    std::fs::write(&tweets_path, TWEETS)?;
    std::fs::write(&prices_path, PRICES)?;

    let strict = load_tweets(&tweets_path, LoadMode::Strict);
    println!("strict load: {}", strict.as_ref().unwrap_err());

    let load = load_tweets(&tweets_path, LoadMode::Lenient)?;
    println!("lenient load: {} kept, {} dropped", load.tweets.len(), load.dropped);
    assert_eq!(load.dropped, 1);

    for a in align_tweets(&load.tweets) {
        println!("  tweet {} {} -> {}", a.tweet.id, a.tweet.ticker, a.trading_date);
    }

    let prices = load_prices(&prices_path)?;
    let aapl = &prices[&Ticker::new("AAPL").expect("valid ticker")];
    for (date, r) in compute_log_returns(aapl)?.entries {
        println!("  AAPL {date} log return {r:+.6}");
    }

    let day = TradingDate::from_ymd(2017, 3, 1).expect("valid date");
    let one = forward_return(aapl, day, Horizon::new(1)?)?.expect("next close exists");
    let two = forward_return(aapl, day, Horizon::new(2)?)?.expect("two closes ahead");
    let past_end = forward_return(aapl, day, Horizon::new(7)?)?;
    println!("AAPL from {day}: 1d {one:.6}, 2d {two:.6}, 7d {past_end:?}");
    assert!((one - 1.1f64.ln()).abs() < 1e-15);
    assert!(past_end.is_none());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
