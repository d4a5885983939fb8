use std::collections::BTreeMap;
use std::time::Duration;

use serde_json::{json, Value};

use super::stopwords::terms;
use super::DiscoveryError;

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub vectors: Vec<Vec<f64>>,
    /// Inputs with no usable terms; their vectors are all zeros.
    pub empty: Vec<usize>,
}

pub trait Embedder: Send + Sync {
    fn name(&self) -> String;
    fn embed(&self, texts: &[String]) -> Result<Embeddings, DiscoveryError>;
}

/// L2-normalized term frequencies over the vocabulary of the inputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct TfEmbedder;

impl Embedder for TfEmbedder {
    fn name(&self) -> String {
        "tf".into()
    }

    fn embed(&self, texts: &[String]) -> Result<Embeddings, DiscoveryError> {
        if texts.is_empty() {
            return Err(DiscoveryError::Embedding("no texts".into()));
        }
        let docs: Vec<Vec<String>> = texts.iter().map(|t| terms(t)).collect();
        let vocab: BTreeMap<&str, usize> = {
            let mut words: Vec<&str> = docs.iter().flatten().map(String::as_str).collect();
            words.sort_unstable();
            words.dedup();
            words.into_iter().enumerate().map(|(i, w)| (w, i)).collect()
        };
        let mut empty = Vec::new();
        let vectors = docs
            .iter()
            .enumerate()
            .map(|(i, doc)| {
                let mut v = vec![0.0; vocab.len()];
                for w in doc {
                    v[vocab[w.as_str()]] += 1.0;
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    empty.push(i);
                } else {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
                v
            })
            .collect();
        Ok(Embeddings { vectors, empty })
    }
}

/// OpenAI-style `POST {base}/embeddings`.
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    base: String,
    key: String,
    model: String,
}

impl HttpEmbedder {
    pub fn new(base: &str, key: &str, model: &str) -> Result<Self, DiscoveryError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| DiscoveryError::Embedding(e.to_string()))?;
        Ok(HttpEmbedder {
            client,
            base: base.trim_end_matches('/').to_string(),
            key: key.to_string(),
            model: model.to_string(),
        })
    }
}

impl Embedder for HttpEmbedder {
    fn name(&self) -> String {
        format!("http:{}", self.model)
    }

    fn embed(&self, texts: &[String]) -> Result<Embeddings, DiscoveryError> {
        let fail = |m: String| DiscoveryError::Embedding(m);
        let resp = self
            .client
            .post(format!("{}/embeddings", self.base))
            .bearer_auth(&self.key)
            .json(&json!({"model": self.model, "input": texts}))
            .send()
            .map_err(|e| fail(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(fail(format!("HTTP {}", resp.status())));
        }
        let body: Value = resp.json().map_err(|e| fail(e.to_string()))?;
        let data = body["data"]
            .as_array()
            .ok_or_else(|| fail("response has no data array".into()))?;
        let mut vectors = Vec::with_capacity(data.len());
        for item in data {
            let v: Option<Vec<f64>> = item["embedding"]
                .as_array()
                .map(|a| a.iter().filter_map(Value::as_f64).collect());
            vectors.push(v.ok_or_else(|| fail("embedding missing".into()))?);
        }
        if vectors.len() != texts.len() {
            return Err(fail(format!("{} embeddings for {} texts", vectors.len(), texts.len())));
        }
        let empty = texts
            .iter()
            .enumerate()
            .filter(|(_, t)| t.trim().is_empty())
            .map(|(i, _)| i)
            .collect();
        Ok(Embeddings { vectors, empty })
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
