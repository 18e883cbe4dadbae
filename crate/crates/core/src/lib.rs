//! Semantic similarity strategies for short-text (job title) classification.
//!
//! A title is compared to a labeled reference collection under one of four
//! strategies: TF-IDF bag of words, averaged word embeddings, Word Mover's
//! Distance (exact optimal transport over word vectors, searched with a
//! centroid lower bound), or externally supplied document vectors. The k
//! nearest references vote on the label, optionally after a coarse SVD-based
//! stage has narrowed the search to one vertical.
//!
//! ```
//! use std::sync::Arc;
//! use titlesim::{Document, EmbeddingTable, KnnIndex, LabeledRef, Strategy, StrategyInputs};
//!
//! let table = EmbeddingTable::from_rows(2, [
//!     ("java", vec![1.0, 0.1]),
//!     ("developer", vec![0.9, 0.3]),
//!     ("nurse", vec![-0.2, 1.0]),
//! ]).unwrap();
//! let inputs = Arc::new(StrategyInputs { table: Some(table), ..Default::default() });
//! let refs = vec![
//!     LabeledRef { doc: Document::new("r1", "Java Developer"), fine_label: "Java Developer".into(), coarse_label: None },
//!     LabeledRef { doc: Document::new("r2", "Nurse"), fine_label: "Nurse".into(), coarse_label: None },
//! ];
//! let index = KnnIndex::build(refs, Strategy::Wmd, inputs).unwrap();
//! let p = index.classify(&Document::new("q", "java"), 1).unwrap();
//! assert_eq!(p.label, "Java Developer");
//! ```

pub mod cli;
pub mod coarse;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod knn;
pub mod strategies;
pub mod text_model;
pub mod transport;

pub use coarse::{assign, discover_clusters, truncated_svd, ClusterModel, SvdFactors, TermDocMatrix};
pub use embeddings::{analogy, centroid, load_embeddings, nearest_words, DocVecTable, EmbeddingTable};
pub use error::{Error, Result};
pub use eval::{accuracy, export_csv, sweep_k, EvalCase, SweepResult, SweepRow};
pub use knn::{classify, classify_cascade, Cascade, KnnIndex, LabeledRef, NeighborSource, Neighbor, Prediction};
pub use strategies::{distance, represent, DocRepresentation, Strategy, StrategyInputs};
pub use text_model::{build_corpus_stats, nbow, tfidf, tokenize, CorpusStats, Document, NBow, SparseVector};
pub use transport::{ground_cost_matrix, solve_transport, wcd, wmd, DiscreteDistribution, Matrix, TransportPlan};
