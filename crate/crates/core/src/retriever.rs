//! Tool retrieval: embeds each contract's description and examples once,
//! then ranks tools by squared L2 distance to the embedded query.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::{ToolCategory, ToolContract};

pub const DEFAULT_DIMENSION: usize = 256;
pub const DEFAULT_SEED: u64 = 0x5eed_a9b5;
/// Confidence gate on the best squared distance (unit vectors, so about
/// cosine 0.4).
pub const DEFAULT_TAU: f64 = 1.2;
pub const DEFAULT_EMBED_TIMEOUT: Duration = Duration::from_secs(10);

pub const STOP_WORDS: [&str; 30] = [
    "a", "an", "the", "of", "in", "on", "at", "to", "for", "by", "with", "from", "and", "or", "is", "are", "was",
    "be", "do", "does", "did", "we", "our", "my", "me", "i", "it", "this", "that", "please",
];

/// Token used when a text has no content words, so every text embeds.
const EMPTY_TOKEN: &str = "<empty>";

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("text is empty")]
    EmptyText,
    #[error("embedding endpoint unavailable: {0}")]
    EndpointUnavailable(String),
    #[error("embedding has dimension {got}, index expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("annotated set is empty")]
    EmptySet,
    #[error("gold tool id {0:?} is not in the index")]
    UnknownGoldId(String),
    #[error("duplicate tool id {0:?} in index")]
    DuplicateId(String),
    #[error("annotated set: {0}")]
    Corpus(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scales to unit length; a zero vector has no direction and is an error.
    pub fn normalized(mut self) -> Result<Self, RetrievalError> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(RetrievalError::EndpointUnavailable("zero or non-finite embedding".into()));
        }
        self.0.iter_mut().for_each(|v| *v /= n);
        Ok(self)
    }
}

pub fn squared_l2(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    a.0.iter().zip(&b.0).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError>;
}

/// Lowercased alphanumeric tokens with stop words removed.
pub fn content_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !STOP_WORDS.contains(t))
        .map(str::to_string)
        .collect()
}

/// Seeded hashed bag of words.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dimension: usize,
    seed: u64,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(DEFAULT_DIMENSION, DEFAULT_SEED)
    }
}

impl HashingEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        HashingEmbedder { dimension, seed }
    }

    /// FNV-1a with the seed folded into the offset basis.
    fn bucket(&self, token: &str) -> usize {
        const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = FNV_OFFSET ^ self.seed.wrapping_mul(FNV_PRIME);
        for b in token.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        (h % self.dimension as u64) as usize
    }
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        if text.trim().is_empty() {
            return Err(RetrievalError::EmptyText);
        }
        let mut v = vec![0.0; self.dimension];
        let tokens = content_tokens(text);
        if tokens.is_empty() {
            v[self.bucket(EMPTY_TOKEN)] = 1.0;
        }
        for t in &tokens {
            v[self.bucket(t)] += 1.0;
        }
        EmbeddingVector(v).normalized()
    }
}

/// Embedding service client: `POST {"text"}` answering `{"vector"}`.
pub struct RemoteEmbedder {
    endpoint: String,
    dimension: usize,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct EmbedReply {
    vector: Vec<f64>,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, dimension: usize, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        RemoteEmbedder {
            endpoint: endpoint.into(),
            dimension,
            agent,
        }
    }

    /// Asks the endpoint once to learn its dimension.
    pub fn probe(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, RetrievalError> {
        let mut e = RemoteEmbedder::new(endpoint, 0, timeout);
        e.dimension = e.request("dimension probe")?.len();
        Ok(e)
    }

    fn request(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        let unavailable = |e: ureq::Error| RetrievalError::EndpointUnavailable(e.to_string());
        let reply: EmbedReply = self
            .agent
            .post(&self.endpoint)
            .send_json(serde_json::json!({ "text": text }))
            .map_err(unavailable)?
            .body_mut()
            .read_json()
            .map_err(unavailable)?;
        Ok(reply.vector)
    }
}

impl Embedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        if text.trim().is_empty() {
            return Err(RetrievalError::EmptyText);
        }
        let v = self.request(text)?;
        if v.len() != self.dimension {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dimension,
                got: v.len(),
            });
        }
        EmbeddingVector(v).normalized()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub tool_id: String,
    pub category: ToolCategory,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    pub dimension: usize,
    pub entries: Vec<IndexEntry>,
}

impl VectorIndex {
    pub fn new(dimension: usize, entries: Vec<IndexEntry>) -> Result<Self, RetrievalError> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &entries {
            if e.vector.dimension() != dimension {
                return Err(RetrievalError::DimensionMismatch {
                    expected: dimension,
                    got: e.vector.dimension(),
                });
            }
            if !seen.insert(e.tool_id.as_str()) {
                return Err(RetrievalError::DuplicateId(e.tool_id.clone()));
            }
        }
        Ok(VectorIndex { dimension, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn category_of(&self, tool_id: &str) -> Option<ToolCategory> {
        self.entries.iter().find(|e| e.tool_id == tool_id).map(|e| e.category)
    }
}

pub fn index_catalog<'a>(
    contracts: impl IntoIterator<Item = &'a ToolContract>,
    embedder: &dyn Embedder,
) -> Result<VectorIndex, RetrievalError> {
    let entries = contracts
        .into_iter()
        .map(|c| {
            Ok(IndexEntry {
                tool_id: c.id.clone(),
                category: c.category,
                vector: embedder.embed(&c.retrieval_text())?,
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    if entries.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    VectorIndex::new(embedder.dimension(), entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    /// `(tool id, squared distance)`, ascending, ties by id.
    pub ranked: Vec<(String, f64)>,
    pub confident: bool,
}

impl RetrievalResult {
    pub fn best(&self) -> (&str, f64) {
        let (id, d) = &self.ranked[0];
        (id, *d)
    }
}

pub fn retrieve(
    query: &str,
    index: &VectorIndex,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<RetrievalResult, RetrievalError> {
    retrieve_with_tau(query, index, k, embedder, DEFAULT_TAU)
}

pub fn retrieve_with_tau(
    query: &str,
    index: &VectorIndex,
    k: usize,
    embedder: &dyn Embedder,
    tau: f64,
) -> Result<RetrievalResult, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let q = embedder.embed(query)?;
    if q.dimension() != index.dimension {
        return Err(RetrievalError::DimensionMismatch {
            expected: index.dimension,
            got: q.dimension(),
        });
    }
    let mut ranked: Vec<(String, f64)> = index
        .entries
        .iter()
        .map(|e| (e.tool_id.clone(), squared_l2(&q, &e.vector)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    let confident = ranked[0].1 <= tau;
    Ok(RetrievalResult { ranked, confident })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedQuery {
    pub query: String,
    pub gold_tool_id: String,
}

/// Reads a `query,gold_tool_id` CSV with a header row.
pub fn load_annotated_set(path: &Path) -> Result<Vec<AnnotatedQuery>, RetrievalError> {
    let text = fs::read_to_string(path).map_err(|e| RetrievalError::Corpus(format!("{}: {e}", path.display())))?;
    parse_annotated_set(&text)
}

pub fn parse_annotated_set(text: &str) -> Result<Vec<AnnotatedQuery>, RetrievalError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| RetrievalError::Corpus(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["query", "gold_tool_id"] {
        return Err(RetrievalError::Corpus("header must be query,gold_tool_id".into()));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| RetrievalError::Corpus(e.to_string())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Miss {
    pub query: String,
    pub gold: String,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub overall: Accuracy,
    pub per_category: BTreeMap<ToolCategory, Accuracy>,
    pub misses: Vec<Miss>,
}

/// Top-1 accuracy of `retrieve` over an annotated set.
pub fn evaluate_retrieval(
    set: &[AnnotatedQuery],
    index: &VectorIndex,
    embedder: &dyn Embedder,
) -> Result<AccuracyReport, RetrievalError> {
    if set.is_empty() {
        return Err(RetrievalError::EmptySet);
    }
    let mut overall = Accuracy { correct: 0, total: 0 };
    let mut per_category = BTreeMap::new();
    let mut misses = Vec::new();
    for item in set {
        let category = index
            .category_of(&item.gold_tool_id)
            .ok_or_else(|| RetrievalError::UnknownGoldId(item.gold_tool_id.clone()))?;
        let result = retrieve(&item.query, index, 1, embedder)?;
        let predicted = result.best().0;
        let hit = predicted == item.gold_tool_id;
        let cat = per_category.entry(category).or_insert(Accuracy { correct: 0, total: 0 });
        cat.total += 1;
        overall.total += 1;
        if hit {
            cat.correct += 1;
            overall.correct += 1;
        } else {
            misses.push(Miss {
                query: item.query.clone(),
                gold: item.gold_tool_id.clone(),
                predicted: predicted.to_string(),
            });
        }
    }
    Ok(AccuracyReport {
        overall,
        per_category,
        misses,
    })
}

pub fn bundled_corpus_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/retrieval_corpus.csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::bundled_catalog;

    fn setup() -> (HashingEmbedder, VectorIndex) {
        let e = HashingEmbedder::default();
        let idx = index_catalog(&bundled_catalog().contracts, &e).unwrap();
        (e, idx)
    }

    #[test]
    fn embedding_is_deterministic_and_unit() {
        let e = HashingEmbedder::default();
        let a = e.embed("Show me the operations plan").unwrap();
        assert_eq!(a, e.embed("Show me the operations plan").unwrap());
        assert!((a.norm() - 1.0).abs() < 1e-6);
        assert!((e.embed("the of and").unwrap().norm() - 1.0).abs() < 1e-6);
        assert!(matches!(e.embed("  \t"), Err(RetrievalError::EmptyText)));
    }

    #[test]
    fn paraphrase_is_closer_than_unrelated() {
        let e = HashingEmbedder::default();
        let show = e.embed("show plan").unwrap();
        let near = squared_l2(&show, &e.embed("display the operations plan").unwrap());
        let far = squared_l2(&show, &e.embed("add a material receipt").unwrap());
        assert!(near < far);
        // frozen regression values
        assert!((near - FROZEN_NEAR).abs() < 1e-12, "{near}");
        assert!((far - FROZEN_FAR).abs() < 1e-12, "{far}");
    }

    const FROZEN_NEAR: f64 = 1.183503419072274;
    const FROZEN_FAR: f64 = 2.0;

    #[test]
    fn index_shape() {
        let (e, idx) = setup();
        assert_eq!(idx.len(), bundled_catalog().len());
        assert_eq!(idx.dimension, e.dimension());
        let mut twins = bundled_catalog().contracts;
        twins.truncate(2);
        twins[1].description = twins[0].description.clone();
        twins[1].examples = twins[0].examples.clone();
        let idx = index_catalog(&twins, &e).unwrap();
        assert_eq!(idx.entries[0].vector, idx.entries[1].vector);
        assert!(matches!(index_catalog(&[], &e), Err(RetrievalError::EmptyIndex)));
    }

    #[test]
    fn own_text_is_distance_zero() {
        let (e, idx) = setup();
        for c in &bundled_catalog().contracts {
            let r = retrieve(&c.retrieval_text(), &idx, 3, &e).unwrap();
            assert_eq!(r.best().0, c.id);
            assert!(r.best().1.abs() < 1e-12);
            assert!(r.confident);
        }
    }

    #[test]
    fn display_query_and_nonsense() {
        let (e, idx) = setup();
        let r = retrieve("Show me the operations plan", &idx, 1, &e).unwrap();
        assert_eq!(r.best().0, "show_plan_table");
        assert!(r.confident);
        let r = retrieve("qqq zzz xxx", &idx, 1, &e).unwrap();
        assert!(!r.confident);
        assert!(r.best().1 > DEFAULT_TAU);
    }

    #[test]
    fn ranking_sorted_with_id_ties() {
        let (e, _) = setup();
        let v = e.embed("same").unwrap();
        let entry = |id: &str| IndexEntry {
            tool_id: id.into(),
            category: ToolCategory::QueryPlan,
            vector: v.clone(),
        };
        let idx = VectorIndex::new(e.dimension(), vec![entry("b"), entry("c"), entry("a")]).unwrap();
        let r = retrieve("same", &idx, 3, &e).unwrap();
        let ids: Vec<&str> = r.ranked.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(matches!(retrieve("same", &idx, 0, &e), Err(RetrievalError::ZeroK)));
    }

    #[test]
    fn evaluation_errors_and_examples() {
        let (e, idx) = setup();
        assert!(matches!(evaluate_retrieval(&[], &idx, &e), Err(RetrievalError::EmptySet)));
        let bad = [AnnotatedQuery {
            query: "x".into(),
            gold_tool_id: "nope".into(),
        }];
        assert!(matches!(evaluate_retrieval(&bad, &idx, &e), Err(RetrievalError::UnknownGoldId(_))));
        let own: Vec<AnnotatedQuery> = bundled_catalog()
            .contracts
            .iter()
            .map(|c| AnnotatedQuery {
                query: c.retrieval_text(),
                gold_tool_id: c.id.clone(),
            })
            .collect();
        assert_eq!(evaluate_retrieval(&own, &idx, &e).unwrap().overall.value(), 1.0);
    }

    #[test]
    fn corpus_header_is_checked() {
        assert!(parse_annotated_set("q,gold\nx,y\n").is_err());
        let set = parse_annotated_set("query,gold_tool_id\n\"a, b\",t\n").unwrap();
        assert_eq!(set[0].query, "a, b");
    }
}
