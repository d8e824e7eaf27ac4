//! Client for the embedding HTTP service.
//!
//! `POST {endpoint}/embed` with `{"texts": [...]}`; a 200 response carries
//! `{"dim": d, "vectors": [[...], ...]}`, one vector per text in order.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use url::Url;

use super::{EmbeddingError, EmbeddingMatrix, DEFAULT_DIM};
use crate::corpus::sentence_id;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub endpoint: Url,
    /// Extra attempts after the first failed one.
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Width the caller expects; checked against the server's `dim`.
    #[serde(default)]
    pub expected_dim: Option<usize>,
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    200
}

fn default_timeout_ms() -> u64 {
    60_000
}

impl ServiceConfig {
    pub fn new(endpoint: Url) -> Self {
        ServiceConfig {
            endpoint,
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            timeout_ms: default_timeout_ms(),
            expected_dim: None,
        }
    }

    fn embed_url(&self) -> String {
        format!("{}/embed", self.endpoint.as_str().trim_end_matches('/'))
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

enum Attempt {
    Retry(EmbeddingError),
    Fail(EmbeddingError),
}

fn attempt(client: &reqwest::blocking::Client, url: &str, texts: &[String]) -> Result<EmbedResponse, Attempt> {
    let response = client
        .post(url)
        .json(&EmbedRequest { texts })
        .send()
        .map_err(|e| Attempt::Retry(EmbeddingError::Transport(e.to_string())))?;
    let status = response.status();
    if status.as_u16() != 200 {
        let err = EmbeddingError::Status(status.as_u16());
        return Err(if status.is_server_error() || status.as_u16() == 429 {
            Attempt::Retry(err)
        } else {
            Attempt::Fail(err)
        });
    }
    let body = response
        .bytes()
        .map_err(|e| Attempt::Retry(EmbeddingError::Transport(e.to_string())))?;
    serde_json::from_slice(&body).map_err(|e| Attempt::Fail(EmbeddingError::Decode(e.to_string())))
}

/// Embeds `texts` through the service. Rows are keyed by sentence id and
/// keep input order; an empty input returns an empty matrix without any
/// request. Transport failures, 5xx and 429 responses are retried.
pub fn fetch_embeddings(texts: &[String], cfg: &ServiceConfig) -> Result<EmbeddingMatrix, EmbeddingError> {
    if texts.is_empty() {
        return EmbeddingMatrix::empty(cfg.expected_dim.unwrap_or(DEFAULT_DIM));
    }
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_millis(cfg.timeout_ms))
        .build()
        .map_err(|e| EmbeddingError::Transport(e.to_string()))?;
    let url = cfg.embed_url();
    let mut tries = 0u32;
    let response = loop {
        match attempt(&client, &url, texts) {
            Ok(r) => break r,
            Err(Attempt::Fail(e)) => return Err(e),
            Err(Attempt::Retry(e)) => {
                if tries >= cfg.retries {
                    return Err(e);
                }
                let delay = cfg.backoff_ms.saturating_mul(1u64 << tries.min(16));
                log::warn!("embedding request failed ({e}); retrying in {delay} ms");
                thread::sleep(Duration::from_millis(delay));
                tries += 1;
            }
        }
    };

    if response.vectors.len() != texts.len() {
        return Err(EmbeddingError::RowCountMismatch {
            expected: texts.len(),
            got: response.vectors.len(),
        });
    }
    let dim = response.dim;
    if dim == 0 {
        return Err(EmbeddingError::InvalidDimension(0));
    }
    if let Some(expected) = cfg.expected_dim {
        if expected != dim {
            return Err(EmbeddingError::DimMismatch { expected, got: dim });
        }
    }
    let mut data = Vec::with_capacity(texts.len() * dim);
    for (row, v) in response.vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(EmbeddingError::DimMismatch { expected: dim, got: v.len() });
        }
        for &x in v {
            let x = x as f32;
            if !x.is_finite() {
                return Err(EmbeddingError::NonFinite { row });
            }
            data.push(x);
        }
    }
    let ids = texts.iter().map(|t| sentence_id(t)).collect();
    EmbeddingMatrix::new(dim, ids, data)
}
