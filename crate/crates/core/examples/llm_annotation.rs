//! Annotate through the HTTP client against a local stand-in model server,
//! then re-run from the on-disk cache and in replay mode.

use std::error::Error;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use eventalpha::annotation::{
    annotate_llm, annotate_replay, AnnotationCache, HttpTransport, Lexicon, LlmConfig,
};
use eventalpha::domain::{parse_timestamp, Taxonomy, Ticker, Tweet};

/// Answers every request with labels picked from words in the prompt.
fn handle(mut stream: TcpStream, hits: &AtomicUsize) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut length = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body)?;
    hits.fetch_add(1, Ordering::SeqCst);

    let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
    let prompt = request["prompt"].as_str().unwrap_or_default();
    let tweet = prompt.rsplit("Tweet:").next().unwrap_or_default().to_lowercase();
    let reply = if tweet.contains("rumor") {
        r#"Sure. {"labels": ["Speculation/Rumor", "Made Up Label"], "tone": -0.6}"#
    } else {
        r#"{"labels": [], "tone": 0.1}"#
    };
    write!(
        stream,
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    )
}

fn spawn_server() -> std::io::Result<(String, Arc<AtomicUsize>)> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let url = format!("http://{}/v1/annotate", listener.local_addr()?);
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&hits);
    std::thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let counter = Arc::clone(&counter);
            std::thread::spawn(move || handle(stream, &counter));
        }
    });
    Ok((url, hits))
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (url, hits) = spawn_server()?;
    let transport = HttpTransport::new(url, Some("demo-token".into()), Duration::from_secs(5));
    let taxonomy = Taxonomy::default_labels();
    let lexicon = Lexicon::new([("good", 1.0), ("bad", -1.0)])?;
    let config = LlmConfig::new("demo-model");

    let tweets: Vec<Tweet> = ["rumor: merger next week", "good numbers", "just a bad day"]
        .iter()
        .enumerate()
        .map(|(i, text)| Tweet {
            id: format!("{i}"),
            timestamp: parse_timestamp("2017-06-01T12:00:00Z").expect("valid timestamp"),
            ticker: Ticker::new("ACME").expect("valid ticker"),
            text: text.to_string(),
        })
        .collect();

    let dir = tempfile::tempdir()?;
    let cache_path = dir.path().join("cache.jsonl");

    let mut cache = AnnotationCache::open(&cache_path)?;
    let (first, stats) = annotate_llm(&tweets, &taxonomy, &lexicon, &transport, &config, &mut cache)?;
    println!("first run: {stats:?}");
    for a in &first {
        let labels: Vec<&str> = a.labels.iter().map(|l| l.as_str()).collect();
        println!("  {} tone {:+.2} labels {:?}", a.tweet_id, a.tone(), labels);
    }
    assert_eq!(stats.requests, 3);

    let mut reopened = AnnotationCache::open(&cache_path)?;
    let (second, stats) = annotate_llm(&tweets, &taxonomy, &lexicon, &transport, &config, &mut reopened)?;
    println!("second run: {stats:?}");
    assert_eq!(stats.requests, 0);
    assert_eq!(first, second);
    assert_eq!(hits.load(Ordering::SeqCst), 3);

    let replayed = annotate_replay(&tweets, &taxonomy, &lexicon, &config, &reopened)?;
    assert_eq!(replayed, first);
    let cold = annotate_replay(&tweets, &taxonomy, &lexicon, &config, &AnnotationCache::in_memory());
    println!("replay on a cold cache: {}", cold.unwrap_err());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
