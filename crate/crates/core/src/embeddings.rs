//! Pretrained word vectors in the plain-text interchange format, document
//! centroids and the nearest-word / analogy diagnostics.
//!
//! File layout: a header line `V D`, then exactly `V` lines of
//! `word v1 ... vD`, space separated and `\n` terminated.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::text_model::{cosine_dense, norm_dense};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vocab: HashMap<String, usize>,
    data: Vec<f64>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` rows, keeping their order.
    pub fn from_rows<I, S>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        let mut table = EmbeddingTable {
            dim,
            words: Vec::new(),
            vocab: HashMap::new(),
            data: Vec::new(),
        };
        for (i, (word, vector)) in rows.into_iter().enumerate() {
            let word = word.into();
            if vector.len() != dim {
                return Err(parse_err(
                    i + 2,
                    format!("row for {word:?} has {} values, expected {dim}", vector.len()),
                ));
            }
            table.push(word, &vector, i + 2)?;
        }
        Ok(table)
    }

    fn push(&mut self, word: String, vector: &[f64], line: usize) -> Result<()> {
        if self.vocab.contains_key(&word) {
            return Err(parse_err(line, format!("duplicate word {word:?}")));
        }
        self.vocab.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.vocab.get(word).copied()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.row(i))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocab.contains_key(word)
    }

    /// Copy with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> EmbeddingTable {
        EmbeddingTable {
            data: self.data.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }

    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "{} {}", self.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(sink, "{word}")?;
            for x in self.row(i) {
                write!(sink, " {x}")?;
            }
            writeln!(sink)?;
        }
        Ok(())
    }
}

pub fn load_embeddings<R: BufRead>(source: R) -> Result<EmbeddingTable> {
    let mut lines = source.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(parse_err(1, "missing header")),
    };
    let fields: Vec<&str> = header.trim_end_matches('\r').split_ascii_whitespace().collect();
    let (count, dim) = match fields.as_slice() {
        [v, d] => (
            v.parse::<usize>()
                .map_err(|_| parse_err(1, format!("bad vocabulary size {v:?}")))?,
            d.parse::<usize>()
                .map_err(|_| parse_err(1, format!("bad dimension {d:?}")))?,
        ),
        _ => return Err(parse_err(1, "header must be \"V D\"")),
    };
    if dim == 0 {
        return Err(parse_err(1, "dimension must be positive"));
    }

    let mut table = EmbeddingTable {
        dim,
        words: Vec::with_capacity(count),
        vocab: HashMap::with_capacity(count),
        data: Vec::with_capacity(count * dim),
    };
    let mut values = Vec::with_capacity(dim);
    for (offset, line) in lines.enumerate() {
        let lineno = offset + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if table.len() == count {
            return Err(parse_err(
                lineno,
                format!("more rows than the declared vocabulary size {count}"),
            ));
        }
        let mut fields = line.split_ascii_whitespace();
        let word = fields.next().unwrap_or_default().to_owned();
        values.clear();
        for f in fields {
            let x: f64 = f
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("non-numeric value {f:?}")))?;
            values.push(x);
        }
        if values.len() != dim {
            return Err(parse_err(
                lineno,
                format!("{} values for {word:?}, expected {dim}", values.len()),
            ));
        }
        table.push(word, &values, lineno)?;
    }
    if table.len() != count {
        return Err(parse_err(
            table.len() + 2,
            format!("found {} rows, header declares {count}", table.len()),
        ));
    }
    Ok(table)
}

/// Externally trained document vectors keyed by document id. Shares the word
/// vector file format.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVecTable(EmbeddingTable);

impl DocVecTable {
    pub fn new(table: EmbeddingTable) -> Self {
        DocVecTable(table)
    }

    pub fn load<R: BufRead>(source: R) -> Result<Self> {
        load_embeddings(source).map(DocVecTable)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.0.get(id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Mean of the in-vocabulary token vectors, counted with multiplicity.
/// Rows are accumulated in vocabulary order so the result does not depend on
/// token order.
pub fn centroid<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Result<Vec<f64>> {
    let mut rows: Vec<usize> = tokens
        .iter()
        .filter_map(|t| table.index_of(t.as_ref()))
        .collect();
    if rows.is_empty() {
        return Err(Error::NoEmbeddableTokens);
    }
    rows.sort_unstable();
    let mut sum = vec![0.0; table.dim()];
    for &r in &rows {
        for (s, x) in sum.iter_mut().zip(table.row(r)) {
            *s += x;
        }
    }
    let n = rows.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// Top-`n` vocabulary words by cosine to `query`, ties broken by word.
/// Words with a zero vector are never returned.
pub fn nearest_words(
    query: &[f64],
    n: usize,
    table: &EmbeddingTable,
    exclude: &[&str],
) -> Result<Vec<(String, f64)>> {
    if query.len() != table.dim() {
        return Err(Error::DimensionMismatch(query.len(), table.dim()));
    }
    if norm_dense(query) == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut scored: Vec<(&str, f64)> = table
        .words()
        .iter()
        .enumerate()
        .filter(|(_, w)| !exclude.contains(&w.as_str()))
        .filter_map(|(i, w)| cosine_dense(query, table.row(i)).ok().map(|c| (w.as_str(), c)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    scored.truncate(n);
    Ok(scored.into_iter().map(|(w, c)| (w.to_owned(), c)).collect())
}

/// Solves `a : b :: c : ?` as the word nearest to `v(b) - v(a) + v(c)`,
/// excluding the three inputs.
pub fn analogy(a: &str, b: &str, c: &str, table: &EmbeddingTable) -> Result<String> {
    let lookup = |w: &str| table.get(w).ok_or_else(|| Error::OutOfVocabulary(w.to_owned()));
    let (va, vb, vc) = (lookup(a)?, lookup(b)?, lookup(c)?);
    let query: Vec<f64> = (0..table.dim()).map(|i| vb[i] - va[i] + vc[i]).collect();
    nearest_words(&query, 1, table, &[a, b, c])?
        .into_iter()
        .next()
        .map(|(w, _)| w)
        .ok_or(Error::NoEmbeddableTokens)
}
