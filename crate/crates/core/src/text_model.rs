//! Tokenization, corpus statistics and the sparse document representations.
//!
//! Two sparse views of a title are produced here: the normalized
//! bag-of-words ([`NBow`]) that supplies the mass of a transport problem, and
//! the TF-IDF [`SparseVector`] used for cosine retrieval and the coarse SVD.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A title with its normalized token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub raw: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        Document {
            id: id.into(),
            raw,
            tokens,
        }
    }
}

/// Lowercases and splits on every character that is neither a letter nor a
/// digit. Mixed tokens such as `j2ee` stay whole.
pub fn tokenize(raw: &str) -> Vec<String> {
    raw.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Normalized bag-of-words: token frequencies divided by the document length.
#[derive(Debug, Clone, PartialEq)]
pub struct NBow {
    entries: BTreeMap<String, f64>,
}

impl NBow {
    pub fn from_tokens(tokens: &[String]) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.clone()).or_default() += 1;
        }
        let len = tokens.len() as f64;
        let entries = counts
            .into_iter()
            .map(|(t, c)| (t, c as f64 / len))
            .collect();
        Ok(NBow { entries })
    }

    /// Entries in lexicographic token order.
    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }

    pub fn weight(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    /// Number of distinct tokens.
    pub fn support_size(&self) -> usize {
        self.entries.len()
    }
}

pub fn nbow(doc: &Document) -> Result<NBow> {
    NBow::from_tokens(&doc.tokens)
}

/// Sparse real vector keyed by token. Zero weights are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: BTreeMap<String, f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut v = SparseVector::new();
        for (t, w) in entries {
            v.insert(t, w);
        }
        v
    }

    /// Sets `token` to `weight`; a zero weight removes the entry.
    pub fn insert(&mut self, token: impl Into<String>, weight: f64) {
        let token = token.into();
        if weight == 0.0 {
            self.entries.remove(&token);
        } else {
            self.entries.insert(token, weight);
        }
    }

    pub fn get(&self, token: &str) -> f64 {
        self.entries.get(token).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Dot product over the shared support, accumulated in token order so
    /// that `a.dot(b)` and `b.dot(a)` agree bit for bit.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let mut a = self.entries.iter().peekable();
        let mut b = other.entries.iter().peekable();
        let mut sum = 0.0;
        while let (Some((ka, wa)), Some((kb, wb))) = (a.peek(), b.peek()) {
            match ka.cmp(kb) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += *wa * *wb;
                    a.next();
                    b.next();
                }
            }
        }
        sum
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector::from_entries(self.entries.iter().map(|(t, w)| (t.clone(), w * factor)))
    }
}

/// Document frequencies over a reference collection.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    doc_count: usize,
    doc_freq: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    /// Stored document frequency; `None` for tokens never seen.
    pub fn doc_freq(&self, token: &str) -> Option<usize> {
        self.doc_freq.get(token).copied()
    }

    /// `ln(N / df)`, with unseen tokens treated as `df = 1`.
    pub fn idf(&self, token: &str) -> f64 {
        let df = self.doc_freq(token).unwrap_or(1);
        (self.doc_count as f64 / df as f64).ln()
    }
}

pub fn build_corpus_stats<'a, I>(docs: I) -> Result<CorpusStats>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut doc_count = 0;
    let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
    for doc in docs {
        doc_count += 1;
        let mut seen: Vec<&String> = doc.tokens.iter().collect();
        seen.sort();
        seen.dedup();
        for t in seen {
            *doc_freq.entry(t.clone()).or_default() += 1;
        }
    }
    if doc_count == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(CorpusStats {
        doc_count,
        doc_freq,
    })
}

/// L2-normalized TF-IDF vector with raw counts as term frequency. Returns the
/// zero vector when every token has zero IDF.
pub fn tfidf(doc: &Document, stats: &CorpusStats) -> Result<SparseVector> {
    if doc.tokens.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &doc.tokens {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut v = SparseVector::from_entries(
        counts
            .into_iter()
            .map(|(t, c)| (t, c as f64 * stats.idf(t))),
    );
    let norm = v.norm();
    if norm > 0.0 {
        v = v.scaled(1.0 / norm);
    }
    Ok(v)
}

pub fn cosine_sparse(a: &SparseVector, b: &SparseVector) -> Result<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn dot_dense(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_dense(a: &[f64]) -> f64 {
    dot_dense(a, a).sqrt()
}

pub fn cosine_dense(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm_dense(a), norm_dense(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot_dense(a, b) / (na * nb)).clamp(-1.0, 1.0))
}
