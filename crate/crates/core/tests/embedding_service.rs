//! The `/embed` client against an in-process HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use semdist_core::corpus::sentence_id;
use semdist_core::embedding::{fetch_embeddings, ServiceConfig};
use semdist_core::EmbeddingError;
use serde_json::{json, Value};

type Handler = dyn Fn(usize, &Value) -> (u16, String) + Send + Sync;

struct MockServer {
    url: url::Url,
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<(String, Value)>>>,
}

impl MockServer {
    /// Serves connections until the test process exits; `handler` gets the
    /// zero-based request index and the parsed JSON body.
    fn start(handler: Box<Handler>) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = url::Url::parse(&format!("http://{}", listener.local_addr().unwrap())).unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let (h, b) = (hits.clone(), bodies.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let mut stream = stream.unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                let mut length = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = line.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            length = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0; length];
                reader.read_exact(&mut body).unwrap();
                let value: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
                let n = h.fetch_add(1, Ordering::SeqCst);
                b.lock().unwrap().push((request_line.trim().to_string(), value.clone()));
                let (status, reply) = handler(n, &value);
                let response = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        MockServer { url, hits, bodies }
    }

    fn config(&self) -> ServiceConfig {
        let mut cfg = ServiceConfig::new(self.url.clone());
        cfg.backoff_ms = 1;
        cfg.timeout_ms = 5_000;
        cfg
    }

    fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

/// Replies with `[len(text), index]` per text.
fn echo(_: usize, body: &Value) -> (u16, String) {
    let texts = body["texts"].as_array().unwrap();
    let vectors: Vec<Value> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| json!([t.as_str().unwrap().len() as f64, i as f64]))
        .collect();
    (200, json!({"dim": 2, "vectors": vectors}).to_string())
}

fn texts(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn empty_input_sends_no_request() {
    let server = MockServer::start(Box::new(echo));
    let m = fetch_embeddings(&[], &server.config()).unwrap();
    assert!(m.is_empty());
    assert_eq!(m.dim(), 768);
    let mut cfg = server.config();
    cfg.expected_dim = Some(16);
    assert_eq!(fetch_embeddings(&[], &cfg).unwrap().dim(), 16);
    assert_eq!(server.hits(), 0);
}

#[test]
fn payload_and_row_order() {
    let server = MockServer::start(Box::new(echo));
    let input = texts(&["Patient has pneumonia.", "No evidence of lymphoma."]);
    let m = fetch_embeddings(&input, &server.config()).unwrap();
    assert_eq!(m.dim(), 2);
    assert_eq!(m.ids(), &[sentence_id(&input[0]), sentence_id(&input[1])]);
    assert_eq!(m.row(0), &[22.0, 0.0]);
    assert_eq!(m.row(1), &[24.0, 1.0]);
    let bodies = server.bodies.lock().unwrap();
    assert_eq!(bodies.len(), 1);
    assert_eq!(bodies[0].0, "POST /embed HTTP/1.1");
    assert_eq!(bodies[0].1, json!({"texts": input}));
}

#[test]
fn row_count_mismatch_is_an_error() {
    let server = MockServer::start(Box::new(|_, _| (200, json!({"dim": 2, "vectors": [[1.0, 2.0]]}).to_string())));
    let err = fetch_embeddings(&texts(&["a.", "b."]), &server.config()).unwrap_err();
    assert!(matches!(err, EmbeddingError::RowCountMismatch { expected: 2, got: 1 }));
    assert!(err.to_string().starts_with("row-count mismatch"));
}

#[test]
fn server_errors_are_retried() {
    let server = MockServer::start(Box::new(|n, body| if n < 2 { (503, "{}".into()) } else { echo(n, body) }));
    let m = fetch_embeddings(&texts(&["x."]), &server.config()).unwrap();
    assert_eq!(m.len(), 1);
    assert_eq!(server.hits(), 3);
}

#[test]
fn retries_are_bounded() {
    let server = MockServer::start(Box::new(|_, _| (500, "{}".into())));
    let mut cfg = server.config();
    cfg.retries = 1;
    assert!(matches!(fetch_embeddings(&texts(&["x."]), &cfg), Err(EmbeddingError::Status(500))));
    assert_eq!(server.hits(), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::start(Box::new(|_, _| (400, r#"{"error":"bad"}"#.into())));
    assert!(matches!(fetch_embeddings(&texts(&["x."]), &server.config()), Err(EmbeddingError::Status(400))));
    assert_eq!(server.hits(), 1);
}

#[test]
fn malformed_and_inconsistent_bodies() {
    let server = MockServer::start(Box::new(|_, _| (200, "not json".into())));
    assert!(matches!(fetch_embeddings(&texts(&["x."]), &server.config()), Err(EmbeddingError::Decode(_))));

    let server = MockServer::start(Box::new(|_, _| (200, json!({"dim": 3, "vectors": [[1.0, 2.0]]}).to_string())));
    assert!(matches!(
        fetch_embeddings(&texts(&["x."]), &server.config()),
        Err(EmbeddingError::DimMismatch { expected: 3, got: 2 })
    ));

    let server = MockServer::start(Box::new(echo));
    let mut cfg = server.config();
    cfg.expected_dim = Some(768);
    assert!(matches!(
        fetch_embeddings(&texts(&["x."]), &cfg),
        Err(EmbeddingError::DimMismatch { expected: 768, got: 2 })
    ));

    let server = MockServer::start(Box::new(|_, _| (200, r#"{"dim": 1, "vectors": [[1e300]]}"#.into())));
    assert!(matches!(
        fetch_embeddings(&texts(&["x."]), &server.config()),
        Err(EmbeddingError::NonFinite { row: 0 })
    ));
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = url::Url::parse(&format!("http://{}", listener.local_addr().unwrap())).unwrap();
    drop(listener);
    let mut cfg = ServiceConfig::new(url);
    cfg.retries = 1;
    cfg.backoff_ms = 1;
    assert!(matches!(fetch_embeddings(&texts(&["x."]), &cfg), Err(EmbeddingError::Transport(_))));
}
