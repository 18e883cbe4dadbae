//! Reference index, k-nearest-neighbor search, majority vote and the
//! coarse-to-vertical cascade.
//!
//! Every neighbor list is ordered by `(distance, ref_index)`, so a list
//! computed for `k_max` truncates to exactly the list for any smaller `k`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::coarse::{assign, discover_clusters, truncated_svd, ClusterModel, TermDocMatrix};
use crate::error::{Error, Result};
use crate::strategies::{distance, represent, DocRepresentation, Strategy, StrategyInputs};
use crate::text_model::{build_corpus_stats, nbow, tfidf, CorpusStats, Document, NBow};
use crate::transport::EmbeddedNBow;

pub const DEFAULT_K: usize = 20;

/// Default number of exact WMD evaluations before pruning starts.
pub fn default_prefetch(k: usize) -> usize {
    (2 * k).max(50)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRef {
    pub doc: Document,
    pub fine_label: String,
    pub coarse_label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub ref_index: usize,
    pub dist: f64,
}

fn neighbor_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.dist.total_cmp(&b.dist).then(a.ref_index.cmp(&b.ref_index))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    pub neighbors: Vec<Neighbor>,
    pub vote_counts: BTreeMap<String, usize>,
}

/// Immutable labeled reference collection with precomputed representations.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    strategy: Strategy,
    refs: Vec<LabeledRef>,
    reps: Vec<DocRepresentation>,
    inputs: Arc<StrategyInputs>,
    warnings: Vec<String>,
    prefetch: Option<usize>,
}

impl KnnIndex {
    /// Represents every reference; those that cannot be represented are
    /// skipped and noted in [`KnnIndex::warnings`].
    pub fn build(refs: Vec<LabeledRef>, strategy: Strategy, inputs: Arc<StrategyInputs>) -> Result<Self> {
        inputs.check(strategy)?;
        let reps: Vec<Result<DocRepresentation>> = refs
            .par_iter()
            .map(|r| represent(&r.doc, strategy, &inputs))
            .collect();
        let mut kept_refs = Vec::with_capacity(refs.len());
        let mut kept_reps = Vec::with_capacity(refs.len());
        let mut warnings = Vec::new();
        for (r, rep) in refs.into_iter().zip(reps) {
            match rep {
                Ok(rep) => {
                    kept_refs.push(r);
                    kept_reps.push(rep);
                }
                Err(err) => warnings.push(format!("skipped reference {}: {err}", r.doc.id)),
            }
        }
        if kept_refs.is_empty() {
            return Err(Error::NoRepresentableRefs);
        }
        Ok(KnnIndex {
            strategy,
            refs: kept_refs,
            reps: kept_reps,
            inputs,
            warnings,
            prefetch: None,
        })
    }

    /// Overrides the WMD prefetch size used by [`KnnIndex::neighbors`].
    pub fn with_prefetch(mut self, prefetch: usize) -> Self {
        self.prefetch = Some(prefetch);
        self
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn refs(&self) -> &[LabeledRef] {
        &self.refs
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn inputs(&self) -> &StrategyInputs {
        &self.inputs
    }

    pub fn represent_query(&self, doc: &Document) -> Result<DocRepresentation> {
        represent(doc, self.strategy, &self.inputs)
    }

    fn check_kind(&self, query: &DocRepresentation) -> Result<()> {
        if query.strategy() != self.strategy {
            return Err(Error::KindMismatch(self.strategy.name(), query.strategy().name()));
        }
        Ok(())
    }

    /// Exhaustive scan. The scan may run in parallel; the result is sorted by
    /// `(dist, ref_index)` afterwards so it does not depend on scheduling.
    pub fn search(&self, query: &DocRepresentation, k: usize) -> Result<Vec<Neighbor>> {
        self.check_kind(query)?;
        let mut all: Vec<Neighbor> = self
            .reps
            .par_iter()
            .enumerate()
            .map(|(ref_index, rep)| {
                distance(query, rep, &self.inputs).map(|dist| Neighbor { ref_index, dist })
            })
            .collect::<Result<_>>()?;
        all.sort_by(neighbor_order);
        all.truncate(k);
        Ok(all)
    }

    /// Exact top-`k` under WMD using the centroid distance as a lower bound.
    ///
    /// References are visited in ascending WCD order. The first `prefetch`
    /// get an exact WMD; after that a reference is evaluated only if its WCD
    /// does not exceed the current k-th best WMD, and the scan stops at the
    /// first one that does. The output equals [`KnnIndex::search`].
    pub fn search_wmd_pruned(&self, query: &NBow, k: usize, prefetch: usize) -> Result<Vec<Neighbor>> {
        if self.strategy != Strategy::Wmd {
            return Err(Error::KindMismatch(self.strategy.name(), Strategy::Wmd.name()));
        }
        if prefetch < k {
            return Err(Error::InvalidArgument(format!(
                "prefetch {prefetch} is smaller than k {k}"
            )));
        }
        let table = self.inputs.table.as_ref().ok_or(Error::MissingPrerequisite {
            strategy: "wmd",
            input: "word embeddings",
        })?;
        let query = EmbeddedNBow::new(query, table)?;
        self.pruned_scan(&query, k, prefetch)
    }

    fn wmd_doc(&self, index: usize) -> &EmbeddedNBow {
        match &self.reps[index] {
            DocRepresentation::Wmd(w) => &w.embedded,
            _ => unreachable!("index strategy is wmd"),
        }
    }

    fn pruned_scan(&self, query: &EmbeddedNBow, k: usize, prefetch: usize) -> Result<Vec<Neighbor>> {
        let table = self.inputs.table.as_ref().expect("checked by caller");
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut order: Vec<Neighbor> = (0..self.reps.len())
            .into_par_iter()
            .map(|ref_index| Neighbor {
                ref_index,
                dist: query.wcd(self.wmd_doc(ref_index)),
            })
            .collect();
        order.sort_by(neighbor_order);

        let head = prefetch.min(order.len());
        let mut best: Vec<Neighbor> = order[..head]
            .par_iter()
            .map(|c| {
                query
                    .wmd(self.wmd_doc(c.ref_index), table)
                    .map(|dist| Neighbor {
                        ref_index: c.ref_index,
                        dist,
                    })
            })
            .collect::<Result<_>>()?;
        best.sort_by(neighbor_order);
        best.truncate(k);

        for candidate in &order[head..] {
            if best.len() == k {
                let kth = best[k - 1].dist;
                // WCD never exceeds WMD in exact arithmetic; the slack keeps
                // rounding in the two computations from pruning a tie.
                if candidate.dist > kth + 1e-9 * (1.0 + kth) {
                    break;
                }
            }
            let n = Neighbor {
                ref_index: candidate.ref_index,
                dist: query.wmd(self.wmd_doc(candidate.ref_index), table)?,
            };
            let pos = best.partition_point(|b| neighbor_order(b, &n) == Ordering::Less);
            if pos < k {
                best.insert(pos, n);
                best.truncate(k);
            }
        }
        Ok(best)
    }

    /// Neighbors of a query document; WMD indexes use the pruned search.
    pub fn neighbors(&self, query: &Document, k: usize) -> Result<Vec<Neighbor>> {
        match self.strategy {
            Strategy::Wmd => {
                let table = self.inputs.table.as_ref().expect("checked at build");
                let embedded = EmbeddedNBow::new(&nbow(query)?, table)?;
                let prefetch = self.prefetch.unwrap_or_else(|| default_prefetch(k)).max(k);
                self.pruned_scan(&embedded, k, prefetch)
            }
            _ => self.search(&self.represent_query(query)?, k),
        }
    }

    /// Majority vote; ties go to the smaller summed distance, then to the
    /// lexicographically smaller label.
    pub fn vote(&self, neighbors: &[Neighbor]) -> Prediction {
        let mut tally: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for n in neighbors {
            let e = tally.entry(&self.refs[n.ref_index].fine_label).or_default();
            e.0 += 1;
            e.1 += n.dist;
        }
        let label = tally
            .iter()
            .min_by(|(la, (ca, sa)), (lb, (cb, sb))| {
                cb.cmp(ca).then(sa.total_cmp(sb)).then(la.cmp(lb))
            })
            .map(|(l, _)| l.to_string())
            .unwrap_or_default();
        Prediction {
            label,
            neighbors: neighbors.to_vec(),
            vote_counts: tally.into_iter().map(|(l, (c, _))| (l.to_owned(), c)).collect(),
        }
    }

    pub fn classify(&self, query: &Document, k: usize) -> Result<Prediction> {
        Ok(self.vote(&self.neighbors(query, k)?))
    }
}

/// Anything that can produce the nearest references of a query, together with
/// the index those references belong to.
pub trait NeighborSource: Sync {
    fn strategy(&self) -> Strategy;

    fn nearest(&self, query: &Document, k: usize) -> Result<(&KnnIndex, Vec<Neighbor>)>;

    fn classify(&self, query: &Document, k: usize) -> Result<Prediction> {
        let (index, neighbors) = self.nearest(query, k)?;
        Ok(index.vote(&neighbors))
    }
}

impl NeighborSource for KnnIndex {
    fn strategy(&self) -> Strategy {
        self.strategy
    }

    fn nearest(&self, query: &Document, k: usize) -> Result<(&KnnIndex, Vec<Neighbor>)> {
        Ok((self, self.neighbors(query, k)?))
    }
}

/// Two-stage classifier: a coarse cluster picks the vertical, and the fine
/// kNN runs on that vertical's references only.
#[derive(Debug, Clone)]
pub struct Cascade {
    stats: Arc<CorpusStats>,
    model: ClusterModel,
    cluster_labels: Vec<Option<String>>,
    verticals: BTreeMap<String, KnnIndex>,
}

impl Cascade {
    /// `cluster_labels[c]` names the vertical of cluster `c`; `None` means the
    /// cluster has no vertical.
    pub fn new(
        stats: Arc<CorpusStats>,
        model: ClusterModel,
        cluster_labels: Vec<Option<String>>,
        verticals: BTreeMap<String, KnnIndex>,
    ) -> Result<Self> {
        if cluster_labels.len() != model.clusters.len() {
            return Err(Error::InvalidArgument(format!(
                "{} cluster labels for {} clusters",
                cluster_labels.len(),
                model.clusters.len()
            )));
        }
        Ok(Cascade {
            stats,
            model,
            cluster_labels,
            verticals,
        })
    }

    /// Groups `refs` into verticals by coarse label and fits the coarse model
    /// on the TF-IDF of all reference titles. Each cluster is mapped to the
    /// most common coarse label among the references assigned to it.
    pub fn from_refs(
        refs: Vec<LabeledRef>,
        strategy: Strategy,
        inputs: Arc<StrategyInputs>,
        q: f64,
        top_terms: usize,
    ) -> Result<Self> {
        if refs.is_empty() {
            return Err(Error::NoRepresentableRefs);
        }
        let stats = match &inputs.stats {
            Some(s) => s.clone(),
            None => build_corpus_stats(refs.iter().map(|r| &r.doc))?,
        };
        let vectors: Vec<_> = refs
            .iter()
            .map(|r| tfidf(&r.doc, &stats).unwrap_or_default())
            .collect();
        let matrix = TermDocMatrix::from_columns(vectors.clone());
        let r_max = matrix.terms().len().min(matrix.columns().len()).max(1);
        let model = discover_clusters(&truncated_svd(&matrix, r_max)?, q, top_terms)?;

        let mut tallies: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); model.clusters.len()];
        for (r, v) in refs.iter().zip(&vectors) {
            if let (Some(label), false) = (&r.coarse_label, v.is_empty()) {
                *tallies[assign(v, &model)?].entry(label).or_default() += 1;
            }
        }
        let cluster_labels = tallies
            .iter()
            .map(|t| {
                t.iter()
                    .min_by(|(la, ca), (lb, cb)| cb.cmp(ca).then(la.cmp(lb)))
                    .map(|(l, _)| l.to_string())
            })
            .collect();

        let mut groups: BTreeMap<String, Vec<LabeledRef>> = BTreeMap::new();
        for r in refs {
            if let Some(label) = r.coarse_label.clone() {
                groups.entry(label).or_default().push(r);
            }
        }
        let mut verticals = BTreeMap::new();
        for (label, group) in groups {
            match KnnIndex::build(group, strategy, inputs.clone()) {
                Ok(index) => {
                    verticals.insert(label, index);
                }
                Err(Error::NoRepresentableRefs) => {}
                Err(err) => return Err(err),
            }
        }
        Cascade::new(Arc::new(stats), model, cluster_labels, verticals)
    }

    /// Applies [`KnnIndex::with_prefetch`] to every vertical.
    pub fn with_prefetch(mut self, prefetch: usize) -> Self {
        self.verticals = std::mem::take(&mut self.verticals)
            .into_iter()
            .map(|(l, v)| (l, v.with_prefetch(prefetch)))
            .collect();
        self
    }

    pub fn model(&self) -> &ClusterModel {
        &self.model
    }

    pub fn verticals(&self) -> &BTreeMap<String, KnnIndex> {
        &self.verticals
    }

    /// Coarse label predicted for `query`.
    pub fn coarse_label(&self, query: &Document) -> Result<&str> {
        let cluster = assign(&tfidf(query, &self.stats)?, &self.model)?;
        self.cluster_labels[cluster]
            .as_deref()
            .ok_or(Error::UnlabeledCluster(cluster))
    }

    pub fn vertical_for(&self, query: &Document) -> Result<(&str, &KnnIndex)> {
        let label = self.coarse_label(query)?;
        self.verticals
            .get_key_value(label)
            .map(|(l, index)| (l.as_str(), index))
            .ok_or_else(|| Error::MissingVertical(label.to_owned()))
    }

    pub fn warnings(&self) -> Vec<String> {
        self.verticals
            .values()
            .flat_map(|v| v.warnings().iter().cloned())
            .collect()
    }
}

impl NeighborSource for Cascade {
    fn strategy(&self) -> Strategy {
        self.verticals
            .values()
            .next()
            .map_or(Strategy::BowCosine, KnnIndex::strategy)
    }

    fn nearest(&self, query: &Document, k: usize) -> Result<(&KnnIndex, Vec<Neighbor>)> {
        let (_, index) = self.vertical_for(query)?;
        Ok((index, index.neighbors(query, k)?))
    }
}

/// Flat kNN classification.
pub fn classify(index: &KnnIndex, query: &Document, k: usize) -> Result<Prediction> {
    index.classify(query, k)
}

pub fn classify_cascade(cascade: &Cascade, query: &Document, k: usize) -> Result<Prediction> {
    NeighborSource::classify(cascade, query, k)
}
