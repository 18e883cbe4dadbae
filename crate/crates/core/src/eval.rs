//! Accuracy, the k sweep and its CSV export.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::NeighborSource;
use crate::text_model::Document;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCase {
    pub query: Document,
    pub gold_label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub strategy: String,
    pub k: usize,
    pub accuracy: f64,
    pub n_queries: usize,
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Exact-match accuracy over the predictions that exist. `None` entries are
/// unclassifiable queries: they are left out of the denominator and counted.
pub fn accuracy<S: AsRef<str>>(predictions: &[Option<S>], gold: &[S]) -> Result<(f64, usize)> {
    if predictions.len() != gold.len() {
        return Err(Error::LengthMismatch(predictions.len(), gold.len()));
    }
    let mut correct = 0usize;
    let mut skipped = 0usize;
    for (p, g) in predictions.iter().zip(gold) {
        match p {
            Some(p) if p.as_ref() == g.as_ref() => correct += 1,
            Some(_) => {}
            None => skipped += 1,
        }
    }
    let scored = gold.len() - skipped;
    let acc = if scored == 0 {
        0.0
    } else {
        correct as f64 / scored as f64
    };
    Ok((acc, skipped))
}

/// One row per `k` in `k_min..=k_max`. Neighbors are searched once per query
/// at `k_max`; each smaller `k` votes on a prefix of that list.
pub fn sweep_k<M: NeighborSource + ?Sized>(
    model: &M,
    cases: &[EvalCase],
    k_min: usize,
    k_max: usize,
) -> Result<SweepResult> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no evaluation cases".into()));
    }
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k_min <= k_max, got {k_min}..{k_max}"
        )));
    }
    // Per query: the labels predicted at each k, or None when unrepresentable.
    let per_query: Vec<Option<Vec<String>>> = cases
        .par_iter()
        .map(|case| {
            model.nearest(&case.query, k_max).ok().map(|(index, neighbors)| {
                (k_min..=k_max)
                    .map(|k| index.vote(&neighbors[..k.min(neighbors.len())]).label)
                    .collect()
            })
        })
        .collect();

    let gold: Vec<&str> = cases.iter().map(|c| c.gold_label.as_str()).collect();
    let strategy = model.strategy().name().to_owned();
    let mut rows = Vec::with_capacity(k_max - k_min + 1);
    for (offset, k) in (k_min..=k_max).enumerate() {
        let predictions: Vec<Option<&str>> = per_query
            .iter()
            .map(|p| p.as_ref().map(|labels| labels[offset].as_str()))
            .collect();
        let (acc, skipped) = accuracy(&predictions, &gold)?;
        rows.push(SweepRow {
            strategy: strategy.clone(),
            k,
            accuracy: acc,
            n_queries: cases.len(),
            n_skipped: skipped,
        });
    }
    Ok(SweepResult { rows })
}

/// Header plus one `strategy,k,accuracy,n_queries,n_skipped` line per row.
pub fn export_csv<W: Write>(result: &SweepResult, mut sink: W) -> Result<()> {
    sink.write_all(b"strategy,k,accuracy,n_queries,n_skipped\n")?;
    for r in &result.rows {
        writeln!(
            sink,
            "{},{},{:.6},{},{}",
            r.strategy, r.k, r.accuracy, r.n_queries, r.n_skipped
        )?;
    }
    sink.flush()?;
    Ok(())
}
