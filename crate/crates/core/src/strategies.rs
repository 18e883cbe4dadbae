//! One distance contract over the four similarity strategies, so that the kNN
//! layer never needs to know which representation it is ranking.

use std::fmt;
use std::str::FromStr;

use crate::embeddings::{centroid, DocVecTable, EmbeddingTable};
use crate::error::{Error, Result};
use crate::text_model::{cosine_dense, cosine_sparse, nbow, tfidf, CorpusStats, Document, NBow, SparseVector};
use crate::transport::EmbeddedNBow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// TF-IDF bag of words, cosine.
    BowCosine,
    /// Mean word vector, cosine.
    AvgW2V,
    /// Word Mover's Distance.
    Wmd,
    /// Externally supplied document vectors, cosine.
    DocVec,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::BowCosine,
        Strategy::AvgW2V,
        Strategy::Wmd,
        Strategy::DocVec,
    ];

    /// CLI token.
    pub fn name(self) -> &'static str {
        match self {
            Strategy::BowCosine => "bow",
            Strategy::AvgW2V => "avgw2v",
            Strategy::Wmd => "wmd",
            Strategy::DocVec => "docvec",
        }
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self, Strategy::AvgW2V | Strategy::Wmd)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?}")))
    }
}

/// Shared resources a strategy may draw on. Only the ones the chosen strategy
/// needs have to be present.
#[derive(Debug, Clone, Default)]
pub struct StrategyInputs {
    pub stats: Option<CorpusStats>,
    pub table: Option<EmbeddingTable>,
    pub docvecs: Option<DocVecTable>,
}

impl StrategyInputs {
    fn stats(&self, strategy: Strategy) -> Result<&CorpusStats> {
        self.stats.as_ref().ok_or(Error::MissingPrerequisite {
            strategy: strategy.name(),
            input: "corpus statistics",
        })
    }

    fn table(&self, strategy: Strategy) -> Result<&EmbeddingTable> {
        self.table.as_ref().ok_or(Error::MissingPrerequisite {
            strategy: strategy.name(),
            input: "word embeddings",
        })
    }

    fn docvecs(&self, strategy: Strategy) -> Result<&DocVecTable> {
        self.docvecs.as_ref().ok_or(Error::MissingPrerequisite {
            strategy: strategy.name(),
            input: "document vectors",
        })
    }

    /// Errors if a resource required by `strategy` is absent.
    pub fn check(&self, strategy: Strategy) -> Result<()> {
        match strategy {
            Strategy::BowCosine => self.stats(strategy).map(drop),
            Strategy::AvgW2V | Strategy::Wmd => self.table(strategy).map(drop),
            Strategy::DocVec => self.docvecs(strategy).map(drop),
        }
    }
}

/// nBOW together with its embedded, renormalized form.
#[derive(Debug, Clone, PartialEq)]
pub struct WmdDoc {
    pub nbow: NBow,
    pub embedded: EmbeddedNBow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DocRepresentation {
    BowCosine(SparseVector),
    AvgW2V(Vec<f64>),
    Wmd(WmdDoc),
    DocVec(Vec<f64>),
}

impl DocRepresentation {
    pub fn strategy(&self) -> Strategy {
        match self {
            DocRepresentation::BowCosine(_) => Strategy::BowCosine,
            DocRepresentation::AvgW2V(_) => Strategy::AvgW2V,
            DocRepresentation::Wmd(_) => Strategy::Wmd,
            DocRepresentation::DocVec(_) => Strategy::DocVec,
        }
    }
}

/// Builds the representation of `doc` under `strategy`. Cosine kinds reject
/// zero vectors here, since they could never be ranked.
pub fn represent(doc: &Document, strategy: Strategy, inputs: &StrategyInputs) -> Result<DocRepresentation> {
    match strategy {
        Strategy::BowCosine => {
            let v = tfidf(doc, inputs.stats(strategy)?)?;
            if v.is_empty() {
                return Err(Error::ZeroVector);
            }
            Ok(DocRepresentation::BowCosine(v))
        }
        Strategy::AvgW2V => {
            let c = centroid(&doc.tokens, inputs.table(strategy)?)?;
            if c.iter().all(|x| *x == 0.0) {
                return Err(Error::ZeroVector);
            }
            Ok(DocRepresentation::AvgW2V(c))
        }
        Strategy::Wmd => {
            let nbow = nbow(doc)?;
            let embedded = EmbeddedNBow::new(&nbow, inputs.table(strategy)?)?;
            Ok(DocRepresentation::Wmd(WmdDoc { nbow, embedded }))
        }
        Strategy::DocVec => {
            let v = inputs
                .docvecs(strategy)?
                .get(&doc.id)
                .ok_or_else(|| Error::MissingDocVector(doc.id.clone()))?;
            if v.iter().all(|x| *x == 0.0) {
                return Err(Error::ZeroVector);
            }
            Ok(DocRepresentation::DocVec(v.to_vec()))
        }
    }
}

/// Smaller is nearer: WMD for [`Strategy::Wmd`], `1 - cosine` otherwise.
pub fn distance(a: &DocRepresentation, b: &DocRepresentation, inputs: &StrategyInputs) -> Result<f64> {
    use DocRepresentation::*;
    match (a, b) {
        (BowCosine(x), BowCosine(y)) => Ok(1.0 - cosine_sparse(x, y)?),
        (AvgW2V(x), AvgW2V(y)) | (DocVec(x), DocVec(y)) => Ok(1.0 - cosine_dense(x, y)?),
        (Wmd(x), Wmd(y)) => x.embedded.wmd(&y.embedded, inputs.table(Strategy::Wmd)?),
        _ => Err(Error::KindMismatch(a.strategy().name(), b.strategy().name())),
    }
}
