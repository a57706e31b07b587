//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

pub fn toy_meta() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/toy_meta")
}

#[derive(Debug, Clone)]
pub struct Recorded {
    /// Request line and headers, lower-cased.
    pub head: String,
    pub body: Value,
}

impl Recorded {
    pub fn prompt(&self) -> &str {
        self.body
            .pointer("/messages/0/content")
            .and_then(Value::as_str)
            .unwrap_or_default()
    }
}

/// A chat-completion endpoint on localhost that answers with scripted
/// message contents in order, repeating the last one when it runs out.
pub struct MockChat {
    pub endpoint: String,
    pub requests: Arc<Mutex<Vec<Recorded>>>,
}

impl MockChat {
    pub fn start(replies: &[&str]) -> MockChat {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let endpoint = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let replies: Vec<String> = replies.iter().map(|s| s.to_string()).collect();
        let log = Arc::clone(&requests);
        thread::spawn(move || {
            for (k, stream) in listener.incoming().enumerate() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut head = String::new();
                let mut content_length = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        content_length = v.trim().parse().unwrap_or(0);
                    }
                    head.push_str(&lower);
                }
                let mut body = vec![0u8; content_length];
                if reader.read_exact(&mut body).is_err() {
                    continue;
                }
                log.lock().unwrap().push(Recorded {
                    head,
                    body: serde_json::from_slice(&body).unwrap_or(Value::Null),
                });
                let content = replies
                    .get(k)
                    .or(replies.last())
                    .cloned()
                    .unwrap_or_default();
                let payload = json!({
                    "id": format!("mock-{k}"),
                    "object": "chat.completion",
                    "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
                })
                .to_string();
                let _ = write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    payload.len(),
                    payload
                );
            }
        });
        MockChat { endpoint, requests }
    }

    pub fn recorded(&self) -> Vec<Recorded> {
        self.requests.lock().unwrap().clone()
    }
}
