#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

/// Minimal HTTP/1.1 stand-in for the annotation endpoint.
pub struct MockServer {
    pub url: String,
    pub hits: Arc<AtomicUsize>,
}

impl MockServer {
    /// `respond(n, body)` gets the 0-based request number and the request
    /// body and returns (status, response body).
    pub fn start<F>(respond: F) -> MockServer
    where
        F: Fn(usize, &str) -> (u16, String) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/annotate", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&hits);
        let respond = Arc::new(respond);
        std::thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let counter = Arc::clone(&counter);
                let respond = Arc::clone(&respond);
                std::thread::spawn(move || {
                    let _ = handle(stream, &counter, &*respond);
                });
            }
        });
        MockServer { url, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn handle(
    mut stream: TcpStream,
    hits: &AtomicUsize,
    respond: &(dyn Fn(usize, &str) -> (u16, String) + Send + Sync),
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut length = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
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
    let n = hits.fetch_add(1, Ordering::SeqCst);
    let (status, reply) = respond(n, &String::from_utf8_lossy(&body));
    let reason = match status {
        200 => "OK",
        401 => "Unauthorized",
        429 => "Too Many Requests",
        _ => "Service Unavailable",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    )
}

/// Labels by keyword found in the tweet part of the prompt.
pub fn keyword_reply(body: &str) -> String {
    let v: serde_json::Value = serde_json::from_str(body).unwrap();
    let prompt = v["prompt"].as_str().unwrap().to_lowercase();
    let tweet = prompt.rsplit("tweet:").next().unwrap();
    let mut labels = Vec::new();
    if tweet.contains("rumor") {
        labels.push("Speculation/Rumor");
    }
    if tweet.contains("boycott") {
        labels.push("Brand Boycott");
    }
    let tone = if tweet.contains("bad") { -0.5 } else { 0.25 };
    serde_json::json!({ "labels": labels, "tone": tone }).to_string()
}
