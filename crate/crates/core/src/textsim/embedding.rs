//! Precomputed embedding vectors and externally supplied pairwise scores.
//!
//! Model inference never happens here: vectors arrive in a text file with a
//! `dim=<d>` header followed by `key<TAB>f1 f2 ... fd` lines, and are
//! L2-normalized on load. Pairwise-score files carry
//! `key_a<TAB>key_b<TAB>score` lines.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Unit-norm vectors keyed by node id or by literal prediction string.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&content, &path.display().to_string())
    }

    pub fn parse(content: &str, path: &str) -> Result<Self> {
        let mut lines = content.lines().enumerate();
        let (header_no, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| Error::EmptyInput(format!("no header in {path}")))?;
        let dim: usize = header
            .trim()
            .strip_prefix("dim=")
            .and_then(|d| d.parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::parse(path, header_no + 1, "expected header `dim=<d>`"))?;

        let mut table = EmbeddingTable::new(dim);
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (key, rest) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, lineno, "expected `key<TAB>values`"))?;
            let values = rest
                .split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| Error::parse(path, lineno, format!("bad float `{v}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != dim {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected {dim} values, got {}", values.len()),
                ));
            }
            if table.vectors.contains_key(key) {
                return Err(Error::parse(path, lineno, format!("duplicate key `{key}`")));
            }
            table.insert(key, values).map_err(|e| {
                Error::parse(path, lineno, e.to_string())
            })?;
        }
        Ok(table)
    }

    /// Inserts a vector, L2-normalizing it. Zero or non-finite vectors are
    /// rejected.
    pub fn insert(&mut self, key: impl Into<String>, mut vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "vector has dimension {}, table has {}",
                vector.len(),
                self.dim
            )));
        }
        let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidInput(
                "vector has zero or non-finite norm".into(),
            ));
        }
        for x in &mut vector {
            *x /= norm;
        }
        self.vectors.insert(key.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.vectors.contains_key(key)
    }

    pub fn vector(&self, key: &str) -> Result<&[f64]> {
        self.vectors
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingEmbedding(key.to_owned()))
    }
}

/// Cosine similarity of two stored unit vectors, rescaled from `[-1, 1]`
/// to `[0, 1]` via `(x + 1) / 2`.
pub fn embed_cosine(table: &EmbeddingTable, key_a: &str, key_b: &str) -> Result<f64> {
    let a = table.vector(key_a)?;
    let b = table.vector(key_b)?;
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot.clamp(-1.0, 1.0) + 1.0) / 2.0)
}

/// Externally computed scores for (key_a, key_b) pairs, e.g. NLI or
/// BERTScore outputs produced offline.
#[derive(Debug, Clone, Default)]
pub struct PairwiseScores {
    map: HashMap<(String, String), f64>,
}

impl PairwiseScores {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&content, &path.display().to_string())
    }

    pub fn parse(content: &str, path: &str) -> Result<Self> {
        let mut scores = PairwiseScores::new();
        for (lineno, line) in content.lines().enumerate() {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected `key_a<TAB>key_b<TAB>score`, got {} fields", fields.len()),
                ));
            }
            let score: f64 = fields[2]
                .parse()
                .map_err(|e| Error::parse(path, lineno, format!("bad score: {e}")))?;
            scores.insert(fields[0], fields[1], score);
        }
        Ok(scores)
    }

    pub fn insert(&mut self, a: impl Into<String>, b: impl Into<String>, score: f64) {
        self.map.insert((a.into(), b.into()), score);
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.map.get(&(a.to_owned(), b.to_owned())).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(3);
        t.insert("x", vec![2.0, 0.0, 0.0]).unwrap();
        t.insert("y", vec![0.0, 5.0, 0.0]).unwrap();
        t.insert("neg", vec![-1.0, 0.0, 0.0]).unwrap();
        t
    }

    #[test]
    fn self_similarity_is_one() {
        let t = table();
        assert_eq!(embed_cosine(&t, "x", "x").unwrap(), 1.0);
    }

    #[test]
    fn orthogonal_is_half() {
        let t = table();
        assert_eq!(embed_cosine(&t, "x", "y").unwrap(), 0.5);
    }

    #[test]
    fn opposite_is_zero() {
        let t = table();
        assert_eq!(embed_cosine(&t, "x", "neg").unwrap(), 0.0);
    }

    #[test]
    fn missing_key_names_the_key() {
        let t = table();
        match embed_cosine(&t, "x", "ghost") {
            Err(Error::MissingEmbedding(k)) => assert_eq!(k, "ghost"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn vectors_are_unit_norm_after_load() {
        let t = EmbeddingTable::parse("dim=2\na\t3 4\nb\t0.1 0\n", "test").unwrap();
        for key in ["a", "b"] {
            let norm: f64 = t.vector(key).unwrap().iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
        assert_eq!(t.dim(), 2);
    }

    #[test]
    fn load_rejects_bad_inputs() {
        assert!(EmbeddingTable::parse("dim=2\na\t1 2 3\n", "t").is_err());
        assert!(EmbeddingTable::parse("dim=2\na\t1 2\na\t1 2\n", "t").is_err());
        assert!(EmbeddingTable::parse("dim=2\na\t0 0\n", "t").is_err());
        assert!(EmbeddingTable::parse("nodim\n", "t").is_err());
    }

    #[test]
    fn pairwise_scores_round_trip() {
        let s = PairwiseScores::parse("a\tb\t0.25\nb\tc\t1\n", "t").unwrap();
        assert_eq!(s.get("a", "b"), Some(0.25));
        assert_eq!(s.get("b", "a"), None);
        assert_eq!(s.len(), 2);
    }
}
