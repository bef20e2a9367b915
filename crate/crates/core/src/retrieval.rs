//! Embedding backends and exhaustive nearest-example retrieval over tool
//! documents.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::llm::map_transport;
use crate::planner::ToolInvocation;
use crate::registry::ToolDocument;

pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Clone, thiserror::Error)]
pub enum RetrievalError {
    #[error("embedding backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("embedding backend configured with zero dimensions")]
    EmptyDim,
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("retrieval index is empty")]
    EmptyIndex,
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, RetrievalError> {
        if values.is_empty() {
            return Err(RetrievalError::EmptyDim);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RetrievalError::InvalidEmbedding("non-finite component".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if a.dim() != b.dim() {
        return Err(RetrievalError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[async_trait]
pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    /// Embeds a batch; output order matches input order.
    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, RetrievalError>;

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        let mut out = self.embed_batch(&[text.to_string()]).await?;
        out.pop().ok_or_else(|| RetrievalError::InvalidEmbedding("empty batch result".into()))
    }
}

/// Offline embedder: lowercase, split on non-alphanumerics, hash every token
/// into a bucket, count, L2-normalize.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    id: String,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Result<Self, RetrievalError> {
        if dim == 0 {
            return Err(RetrievalError::EmptyDim);
        }
        Ok(Self {
            dim,
            id: format!("hashing-tf/{dim}"),
        })
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut counts = vec![0.0f64; self.dim];
        for token in text
            .to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            counts[self.bucket(token)] += 1.0;
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.0 {
            counts.iter_mut().for_each(|c| *c /= norm);
        }
        EmbeddingVector(counts)
    }

    pub fn bucket(&self, token: &str) -> usize {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(token.as_bytes());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        (u64::from_le_bytes(head) % self.dim as u64) as usize
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM).expect("non-zero default dim")
    }
}

#[async_trait]
impl Embedder for HashingEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

/// Client for an OpenAI-compatible `/embeddings` endpoint.
pub struct RemoteEmbedder {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    dim: usize,
    id: String,
    client: reqwest::Client,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    input: &'a [String],
    model: &'a str,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl RemoteEmbedder {
    const BATCH: usize = 64;

    pub fn new(endpoint: &str, api_key: Option<&str>, model: &str, dim: usize) -> Result<Self, RetrievalError> {
        if dim == 0 {
            return Err(RetrievalError::EmptyDim);
        }
        Ok(Self {
            endpoint: endpoint.to_string(),
            api_key: api_key.map(str::to_string),
            model: model.to_string(),
            dim,
            id: format!("remote/{model}/{dim}"),
            client: reqwest::Client::new(),
        })
    }

    async fn embed_chunk(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        let mut req = self.client.post(&self.endpoint).json(&EmbeddingRequest {
            input: texts,
            model: &self.model,
        });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let unavailable = |m: String| RetrievalError::BackendUnavailable(m);
        let response = req
            .send()
            .await
            .map_err(|e| unavailable(map_transport(e, std::time::Duration::ZERO).to_string()))?;
        if !response.status().is_success() {
            return Err(unavailable(format!("status {}", response.status().as_u16())));
        }
        let parsed: EmbeddingResponse = response
            .json()
            .await
            .map_err(|e| RetrievalError::InvalidEmbedding(e.to_string()))?;
        if parsed.data.len() != texts.len() {
            return Err(RetrievalError::InvalidEmbedding(format!(
                "{} embeddings for {} inputs",
                parsed.data.len(),
                texts.len()
            )));
        }
        parsed
            .data
            .into_iter()
            .map(|d| {
                let v = EmbeddingVector::new(d.embedding)?;
                if v.dim() != self.dim {
                    return Err(RetrievalError::DimMismatch {
                        left: v.dim(),
                        right: self.dim,
                    });
                }
                Ok(v)
            })
            .collect()
    }
}

#[async_trait]
impl Embedder for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, RetrievalError> {
        // chunks run concurrently; join_all keeps input order
        let chunks = futures::future::join_all(texts.chunks(Self::BATCH).map(|c| self.embed_chunk(c))).await;
        let mut out = Vec::with_capacity(texts.len());
        for chunk in chunks {
            out.extend(chunk?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedExample {
    /// `"<tool>/<pair index>"`.
    pub id: String,
    pub tool_name: String,
    pub query: String,
    pub gold_invocation: ToolInvocation,
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalIndex {
    examples: Vec<IndexedExample>,
    backend_id: String,
    dim: usize,
}

impl RetrievalIndex {
    /// One example per question-answer pair, in document then pair order.
    pub async fn build(embedder: &dyn Embedder, documents: &[ToolDocument]) -> Result<Self, RetrievalError> {
        let pairs: Vec<_> = documents
            .iter()
            .flat_map(|d| d.qa_pairs.iter().enumerate().map(move |(i, p)| (d, i, p)))
            .collect();
        if pairs.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let queries: Vec<String> = pairs.iter().map(|(_, _, p)| p.query.clone()).collect();
        let embeddings = embedder.embed_batch(&queries).await?;
        let examples = pairs
            .into_iter()
            .zip(embeddings)
            .map(|((doc, i, pair), embedding)| IndexedExample {
                id: format!("{}/{i}", doc.tool_name),
                tool_name: doc.tool_name.clone(),
                query: pair.query.clone(),
                gold_invocation: pair.invocation.clone(),
                embedding,
            })
            .collect();
        Ok(Self {
            examples,
            backend_id: embedder.id().to_string(),
            dim: embedder.dim(),
        })
    }

    pub fn examples(&self) -> &[IndexedExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Top-k by cosine, descending; ties keep index order.
    pub fn rank(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<(&IndexedExample, f64)>, RetrievalError> {
        if self.examples.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let mut scored = self
            .examples
            .iter()
            .map(|e| Ok((e, cosine(query, &e.embedding)?)))
            .collect::<Result<Vec<_>, RetrievalError>>()?;
        // stable sort: equal scores stay in insertion order
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        scored.truncate(k.max(1));
        Ok(scored)
    }

    pub async fn retrieve(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        k: usize,
    ) -> Result<Vec<(&IndexedExample, f64)>, RetrievalError> {
        if self.examples.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let q = embedder.embed(query).await?;
        self.rank(&q, k)
    }
}
