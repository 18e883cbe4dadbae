//! Coarse stage: truncated SVD of the TF-IDF term-document matrix, a cluster
//! count chosen by explained variance, top-term labels and absolute-cosine
//! assignment.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::text_model::SparseVector;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

pub const DEFAULT_Q: f64 = 0.8;
pub const DEFAULT_TOP_TERMS: usize = 3;

/// Sparse term-document matrix: one column per document, rows indexed by the
/// sorted union of column terms.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDocMatrix {
    terms: Vec<String>,
    columns: Vec<SparseVector>,
}

impl TermDocMatrix {
    pub fn from_columns(columns: Vec<SparseVector>) -> Self {
        let terms: BTreeSet<&String> = columns.iter().flat_map(|c| c.entries().keys()).collect();
        let terms = terms.into_iter().cloned().collect();
        TermDocMatrix { terms, columns }
    }

    /// Dense `rows x cols` input; row `i` is named `t{i:04}`.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let columns = (0..n_cols)
            .map(|j| {
                SparseVector::from_entries(
                    rows.iter()
                        .enumerate()
                        .map(|(i, r)| (format!("t{i:04}"), r[j])),
                )
            })
            .collect();
        let mut m = TermDocMatrix::from_columns(columns);
        m.terms = (0..rows.len()).map(|i| format!("t{i:04}")).collect();
        m
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn columns(&self) -> &[SparseVector] {
        &self.columns
    }

    fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.terms.len(), self.columns.len());
        for (j, col) in self.columns.iter().enumerate() {
            for (t, w) in col.entries() {
                let i = self.terms.binary_search(t).expect("term collected from columns");
                m[(i, j)] = *w;
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub terms: Vec<String>,
    /// Non-increasing, all above the rank tolerance.
    pub singular_values: Vec<f64>,
    /// One unit term-space direction per singular value; the first nonzero
    /// coordinate of each is positive.
    pub term_basis: Vec<Vec<f64>>,
    /// `doc_coords[d][r]` is the projection of column `d` onto direction `r`.
    pub doc_coords: Vec<Vec<f64>>,
}

pub fn truncated_svd(matrix: &TermDocMatrix, r_max: usize) -> Result<SvdFactors> {
    if matrix.terms.is_empty() || matrix.columns.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if r_max == 0 {
        return Err(Error::InvalidArgument("r_max must be at least 1".into()));
    }
    let svd = matrix.dense().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");
    let sigma = svd.singular_values;

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let top = order.first().map_or(0.0, |&i| sigma[i]);
    let cutoff = RANK_TOLERANCE * top;

    let mut factors = SvdFactors {
        terms: matrix.terms.clone(),
        singular_values: Vec::new(),
        term_basis: Vec::new(),
        doc_coords: vec![Vec::new(); matrix.columns.len()],
    };
    for &k in order.iter().take(r_max) {
        let s = sigma[k];
        if s <= cutoff || s == 0.0 {
            break;
        }
        let mut dir: Vec<f64> = u.column(k).iter().copied().collect();
        let mut coords: Vec<f64> = v_t.row(k).iter().map(|v| v * s).collect();
        if dir.iter().find(|x| x.abs() > 1e-9).is_some_and(|x| *x < 0.0) {
            dir.iter_mut().for_each(|x| *x = -*x);
            coords.iter_mut().for_each(|x| *x = -*x);
        }
        factors.singular_values.push(s);
        factors.term_basis.push(dir);
        for (d, c) in coords.into_iter().enumerate() {
            factors.doc_coords[d].push(c);
        }
    }
    Ok(factors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub label: String,
    pub basis_direction: Vec<f64>,
    pub member_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub terms: Vec<String>,
    pub clusters: Vec<Cluster>,
    pub q: f64,
}

/// Keeps the smallest number of directions whose squared singular values
/// reach fraction `q` of the total, labelling each by its heaviest terms.
pub fn discover_clusters(factors: &SvdFactors, q: f64, top_terms: usize) -> Result<ClusterModel> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!("q must lie in (0, 1], got {q}")));
    }
    if factors.singular_values.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let energy: Vec<f64> = factors.singular_values.iter().map(|s| s * s).collect();
    let total: f64 = energy.iter().sum();
    let mut cumulative = 0.0;
    let mut r = energy.len();
    for (i, e) in energy.iter().enumerate() {
        cumulative += e;
        if cumulative / total >= q - 1e-12 {
            r = i + 1;
            break;
        }
    }

    let mut member_count = vec![0usize; r];
    for coords in &factors.doc_coords {
        if let Some(best) = argmax_abs(&coords[..r]) {
            member_count[best] += 1;
        }
    }

    let clusters = factors.term_basis[..r]
        .iter()
        .zip(member_count)
        .map(|(dir, member_count)| Cluster {
            label: top_term_label(&factors.terms, dir, top_terms),
            basis_direction: dir.clone(),
            member_count,
        })
        .collect();
    Ok(ClusterModel {
        terms: factors.terms.clone(),
        clusters,
        q,
    })
}

fn top_term_label(terms: &[String], dir: &[f64], top_terms: usize) -> String {
    let mut ranked: Vec<(&str, f64)> = terms
        .iter()
        .zip(dir)
        .filter(|(_, w)| **w != 0.0)
        .map(|(t, w)| (t.as_str(), w.abs()))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
        .iter()
        .take(top_terms)
        .map(|(t, _)| *t)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Index of the largest absolute value, first one on ties. `None` if all zero.
fn argmax_abs(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        let a = v.abs();
        if a > 0.0 && best.map_or(true, |(_, b)| a > b) {
            best = Some((i, a));
        }
    }
    best.map(|(i, _)| i)
}

/// Cluster whose direction has the largest absolute cosine with `doc_vec`;
/// ties, including a vector orthogonal to every direction, go to the lower
/// index.
pub fn assign(doc_vec: &SparseVector, model: &ClusterModel) -> Result<usize> {
    let norm = doc_vec.norm();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let coords: Vec<(usize, f64)> = doc_vec
        .entries()
        .iter()
        .filter_map(|(t, w)| model.terms.binary_search(t).ok().map(|i| (i, *w)))
        .collect();
    let mut best = (0, f64::NEG_INFINITY);
    for (k, cluster) in model.clusters.iter().enumerate() {
        let dir_norm = cluster.basis_direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dot: f64 = coords.iter().map(|(i, w)| w * cluster.basis_direction[*i]).sum();
        let cos = (dot / (norm * dir_norm)).abs();
        if cos > best.1 {
            best = (k, cos);
        }
    }
    Ok(best.0)
}
