//! Proof corpora with embeddings, cosine-distance matrices and
//! kurtosis-based layer selection.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::{self, LexError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("proof {proof_id}: embedding has dimension {got}, expected {expected}")]
    DimensionMismatch { proof_id: String, expected: usize, got: usize },
    #[error("duplicate proof id {0}")]
    DuplicateProofId(String),
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("proof {0} has a zero embedding")]
    ZeroVector(String),
    #[error("distribution has zero variance")]
    DegenerateDistribution,
    #[error("layer {layer}: distance distribution has zero variance")]
    DegenerateLayer { layer: u32 },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid layer stack: {0}")]
    InvalidStack(String),
    #[error("proof {proof_id}: {source}")]
    Lex { proof_id: String, source: LexError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Plain,
    Ablated,
    Human,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Plain => "plain",
            Self::Ablated => "ablated",
            Self::Human => "human",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofRecord {
    pub proof_id: String,
    pub theorem_id: String,
    pub condition: Condition,
    pub lean_text: String,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub records: Vec<ProofRecord>,
    pub dimension: usize,
}

impl Corpus {
    pub fn ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.proof_id.as_str()).collect()
    }

    /// Theorem ids in first-appearance order.
    pub fn theorem_ids(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.records.iter().map(|r| r.theorem_id.as_str()).filter(|t| seen.insert(*t)).collect()
    }

    pub fn for_theorem(&self, theorem_id: &str) -> Vec<&ProofRecord> {
        self.records.iter().filter(|r| r.theorem_id == theorem_id).collect()
    }
}

pub fn strip_comments(lean_text: &str) -> Result<String, LexError> {
    lexer::strip_comments(lean_text)
}

/// Parses a JSON Lines corpus. Blank lines are skipped; comments are
/// stripped from every `lean_text`.
pub fn parse_corpus(text: &str) -> Result<Corpus, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut dimension = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: ProofRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::MalformedRecord { line: line_no, reason: e.to_string() })?;
        if rec.proof_id.is_empty() {
            return Err(CorpusError::MalformedRecord { line: line_no, reason: "empty proof_id".into() });
        }
        if rec.embedding.is_empty() {
            return Err(CorpusError::MalformedRecord { line: line_no, reason: "empty embedding".into() });
        }
        if rec.embedding.iter().any(|x| !x.is_finite()) {
            return Err(CorpusError::MalformedRecord { line: line_no, reason: "non-finite embedding entry".into() });
        }
        let d = *dimension.get_or_insert(rec.embedding.len());
        if rec.embedding.len() != d {
            return Err(CorpusError::DimensionMismatch { proof_id: rec.proof_id, expected: d, got: rec.embedding.len() });
        }
        if !seen.insert(rec.proof_id.clone()) {
            return Err(CorpusError::DuplicateProofId(rec.proof_id));
        }
        rec.lean_text = strip_comments(&rec.lean_text).map_err(|source| CorpusError::Lex { proof_id: rec.proof_id.clone(), source })?;
        records.push(rec);
    }
    let dimension = dimension.ok_or(CorpusError::EmptyCorpus)?;
    Ok(Corpus { records, dimension })
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
    parse_corpus(&text)
}

/// Symmetric matrix of pairwise dissimilarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFile", into = "MatrixFile")]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    n: usize,
    #[serde(with = "crate::json::f17::matrix")]
    entries: Vec<Vec<f64>>,
}

impl TryFrom<MatrixFile> for DistanceMatrix {
    type Error = CorpusError;

    fn try_from(f: MatrixFile) -> Result<Self, CorpusError> {
        if f.entries.len() != f.n {
            return Err(CorpusError::InvalidMatrix(format!("n = {} but {} rows", f.n, f.entries.len())));
        }
        DistanceMatrix::from_rows(&f.entries)
    }
}

impl From<DistanceMatrix> for MatrixFile {
    fn from(m: DistanceMatrix) -> Self {
        MatrixFile { n: m.n, entries: m.rows() }
    }
}

impl DistanceMatrix {
    /// Validates symmetry (to 1e-12 relative), a zero diagonal, finiteness
    /// and non-negativity.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CorpusError> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(CorpusError::InvalidMatrix(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    return Err(CorpusError::InvalidMatrix(format!("entry ({i}, {j}) = {x} is not a finite non-negative number")));
                }
                if i == j && x != 0.0 {
                    return Err(CorpusError::InvalidMatrix(format!("diagonal entry {i} is {x}")));
                }
                let y = rows[j][i];
                if (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                    return Err(CorpusError::InvalidMatrix(format!("asymmetric at ({i}, {j})")));
                }
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n.max(1)).take(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Strict upper triangle in row-major order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Reorders points: entry (i, j) of the result is entry (perm[i], perm[j]).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, entries }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        self.permuted(indices).truncated(indices.len())
    }

    fn truncated(mut self, n: usize) -> Self {
        if n == self.n {
            return self;
        }
        let old = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            entries.extend_from_slice(&self.entries[i * old..i * old + n]);
        }
        self.n = n;
        self.entries = entries;
        self
    }
}

/// `1 − cos(vᵢ, vⱼ)` for every pair, clamped to `[0, 2]`.
///
/// Each entry is computed once for `i < j` in a fixed summation order and
/// mirrored, so the result is exactly symmetric.
pub fn cosine_distance_matrix(embeddings: &[Vec<f64>]) -> Result<DistanceMatrix, CorpusError> {
    cosine_distance_matrix_labeled(embeddings, |i| format!("#{i}"))
}

pub fn corpus_distance_matrix(records: &[&ProofRecord]) -> Result<DistanceMatrix, CorpusError> {
    let vectors: Vec<Vec<f64>> = records.iter().map(|r| r.embedding.clone()).collect();
    cosine_distance_matrix_labeled(&vectors, |i| records[i].proof_id.clone())
}

fn cosine_distance_matrix_labeled(embeddings: &[Vec<f64>], label: impl Fn(usize) -> String) -> Result<DistanceMatrix, CorpusError> {
    let n = embeddings.len();
    if let Some(first) = embeddings.first() {
        if let Some((i, v)) = embeddings.iter().enumerate().find(|(_, v)| v.len() != first.len()) {
            return Err(CorpusError::DimensionMismatch { proof_id: label(i), expected: first.len(), got: v.len() });
        }
    }
    let norms: Vec<f64> = embeddings.iter().map(|v| dot(v, v).sqrt()).collect();
    if let Some(i) = norms.iter().position(|&x| x == 0.0 || !x.is_finite()) {
        return Err(CorpusError::ZeroVector(label(i)));
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let cos = dot(&embeddings[i], &embeddings[j]) / (norms[i] * norms[j]);
            let d = (1.0 - cos).clamp(0.0, 2.0);
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, entries })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pearson kurtosis `m₄ / m₂²` with population (1/n) central moments.
pub fn kurtosis(values: &[f64]) -> Result<f64, CorpusError> {
    if values.len() < 2 {
        return Err(CorpusError::TooFewPoints { needed: 2, got: values.len() });
    }
    let first = values[0];
    if values.iter().all(|&x| x == first) {
        return Err(CorpusError::DegenerateDistribution);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(CorpusError::DegenerateDistribution);
    }
    Ok(m4 / (m2 * m2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub index: u32,
    pub matrix: DistanceMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<Layer>,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>) -> Result<Self, CorpusError> {
        if layers.is_empty() {
            return Err(CorpusError::InvalidStack("no layers".into()));
        }
        for w in layers.windows(2) {
            if w[1].index <= w[0].index {
                return Err(CorpusError::InvalidStack(format!("layer {} follows layer {}", w[1].index, w[0].index)));
            }
            if w[1].matrix.n() != w[0].matrix.n() {
                return Err(CorpusError::InvalidStack(format!("layer {} has n = {}, expected {}", w[1].index, w[1].matrix.n(), w[0].matrix.n())));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackManifest {
    pub layers: Vec<StackManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackManifestEntry {
    pub layer_index: u32,
    pub file: String,
}

pub const STACK_MANIFEST: &str = "manifest.json";

pub fn layer_file_name(index: u32) -> String {
    format!("layer_{index}.dist.json")
}

/// Reads a directory of `layer_<k>.dist.json` files listed in `manifest.json`.
pub fn load_layer_stack(dir: &Path) -> Result<LayerStack, CorpusError> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|source| CorpusError::Io { path: p.to_owned(), source });
    let manifest: StackManifest = serde_json::from_str(&read(&dir.join(STACK_MANIFEST))?)?;
    let mut layers = Vec::new();
    for e in manifest.layers {
        let matrix: DistanceMatrix = serde_json::from_str(&read(&dir.join(&e.file))?)?;
        layers.push(Layer { index: e.layer_index, matrix });
    }
    LayerStack::new(layers)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerScore {
    pub index: u32,
    pub kurtosis: f64,
}

/// Kurtosis of each layer's upper-triangle distance distribution.
///
/// Values are sorted before summation, so scores do not depend on how the
/// proofs are ordered.
pub fn layer_kurtoses(stack: &LayerStack) -> Result<Vec<LayerScore>, CorpusError> {
    stack
        .layers
        .iter()
        .map(|layer| {
            if layer.matrix.n() < 3 {
                return Err(CorpusError::TooFewPoints { needed: 3, got: layer.matrix.n() });
            }
            let mut values = layer.matrix.upper_triangle();
            values.sort_by(f64::total_cmp);
            let k = kurtosis(&values).map_err(|e| match e {
                CorpusError::DegenerateDistribution => CorpusError::DegenerateLayer { layer: layer.index },
                other => other,
            })?;
            Ok(LayerScore { index: layer.index, kurtosis: k })
        })
        .collect()
}

/// Layer whose pairwise distances have the highest kurtosis; ties go to the
/// smallest layer index.
pub fn select_layer(stack: &LayerStack) -> Result<u32, CorpusError> {
    let scores = layer_kurtoses(stack)?;
    let mut best = scores[0];
    for s in &scores[1..] {
        if s.kurtosis > best.kurtosis {
            best = *s;
        }
    }
    Ok(best.index)
}
