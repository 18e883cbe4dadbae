mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;

use common::{gram_singular_values, planted_table, random_doc, rng};
use titlesim::{
    assign, build_corpus_stats, discover_clusters, export_csv, nbow, sweep_k, tfidf, truncated_svd, EvalCase,
    KnnIndex, LabeledRef, NeighborSource, SparseVector, Strategy, StrategyInputs, TermDocMatrix,
};

fn random_refs(seed: u64, n: usize, labels: usize) -> (Arc<StrategyInputs>, Vec<LabeledRef>) {
    let mut r = rng(seed);
    let table = planted_table(&mut r, 30, 5);
    let refs: Vec<LabeledRef> = (0..n)
        .map(|i| LabeledRef {
            doc: random_doc(&mut r, format!("r{i}"), &table, 4),
            fine_label: format!("L{}", r.gen_range(0..labels)),
            coarse_label: None,
        })
        .collect();
    let stats = build_corpus_stats(refs.iter().map(|x| &x.doc)).unwrap();
    let inputs = Arc::new(StrategyInputs {
        stats: Some(stats),
        table: Some(table),
        docvecs: None,
    });
    (inputs, refs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn pruned_equals_exhaustive(seed in any::<u64>(), k in 1usize..8, extra in 0usize..10) {
        let (inputs, refs) = random_refs(seed, 60, 4);
        let table = inputs.table.clone().unwrap();
        let index = KnnIndex::build(refs, Strategy::Wmd, inputs).unwrap();
        let mut r = rng(seed ^ 0xfeed);
        for q in 0..3 {
            let doc = random_doc(&mut r, format!("q{q}"), &table, 4);
            let exhaustive = index.search(&index.represent_query(&doc).unwrap(), k).unwrap();
            let pruned = index.search_wmd_pruned(&nbow(&doc).unwrap(), k, k + extra).unwrap();
            prop_assert_eq!(pruned, exhaustive);
        }
    }

    #[test]
    fn k1_is_nearest_label_and_votes_sum(seed in any::<u64>(), k in 1usize..10) {
        let (inputs, refs) = random_refs(seed, 40, 3);
        let table = inputs.table.clone().unwrap();
        let mut r = rng(seed ^ 1);
        for strategy in [Strategy::BowCosine, Strategy::AvgW2V, Strategy::Wmd] {
            let index = KnnIndex::build(refs.clone(), strategy, inputs.clone()).unwrap();
            let doc = random_doc(&mut r, "q".into(), &table, 4);
            let Ok(rep) = index.represent_query(&doc) else { continue };
            let nearest = index.search(&rep, 1).unwrap()[0];
            let p = index.classify(&doc, 1).unwrap();
            prop_assert_eq!(&p.label, &index.refs()[nearest.ref_index].fine_label);
            let p = index.classify(&doc, k).unwrap();
            prop_assert_eq!(p.vote_counts.values().sum::<usize>(), p.neighbors.len());
            prop_assert_eq!(p.neighbors.len(), k.min(index.len()));
            prop_assert!(p.neighbors.windows(2).all(|w| w[0].dist <= w[1].dist));
        }
    }

    #[test]
    fn avgw2v_ranking_scale_invariant(seed in any::<u64>(), s in 0.01f64..100.0) {
        let (inputs, refs) = random_refs(seed, 40, 3);
        let table = inputs.table.clone().unwrap();
        let scaled = Arc::new(StrategyInputs { table: Some(table.scaled(s)), ..(*inputs).clone() });
        let a = KnnIndex::build(refs.clone(), Strategy::AvgW2V, inputs).unwrap();
        let b = KnnIndex::build(refs, Strategy::AvgW2V, scaled).unwrap();
        let mut r = rng(seed ^ 2);
        let doc = random_doc(&mut r, "q".into(), &table, 4);
        let ids = |idx: &KnnIndex| idx.classify(&doc, 7).unwrap();
        let (pa, pb) = (ids(&a), ids(&b));
        prop_assert_eq!(pa.label, pb.label);
        for (x, y) in pa.neighbors.iter().zip(&pb.neighbors) {
            prop_assert!((x.dist - y.dist).abs() <= 1e-12);
        }
    }

    #[test]
    fn sweep_truncation_consistency(seed in any::<u64>()) {
        let (inputs, refs) = random_refs(seed, 50, 3);
        let table = inputs.table.clone().unwrap();
        let index = KnnIndex::build(refs, Strategy::Wmd, inputs).unwrap();
        let mut r = rng(seed ^ 3);
        let cases: Vec<EvalCase> = (0..8).map(|i| EvalCase {
            query: random_doc(&mut r, format!("q{i}"), &table, 3),
            gold_label: format!("L{}", r.gen_range(0..3)),
        }).collect();
        let sweep = sweep_k(&index, &cases, 1, 12).unwrap();
        prop_assert_eq!(sweep.rows.len(), 12);
        for row in &sweep.rows {
            let single = sweep_k(&index, &cases, row.k, row.k).unwrap();
            prop_assert_eq!(&single.rows[0], row);
            let correct = cases.iter()
                .filter(|c| index.classify(&c.query, row.k).unwrap().label == c.gold_label)
                .count();
            prop_assert!((row.accuracy - correct as f64 / cases.len() as f64).abs() < 1e-15);
        }
        // case order does not matter
        let mut reversed = cases.clone();
        reversed.reverse();
        prop_assert_eq!(sweep_k(&index, &reversed, 1, 12).unwrap(), sweep.clone());

        let csv = |res| { let mut v = Vec::new(); export_csv(res, &mut v).unwrap(); v };
        prop_assert_eq!(csv(&sweep), csv(&sweep_k(&index, &cases, 1, 12).unwrap()));
    }

    #[test]
    fn svd_matches_gram_oracle(seed in any::<u64>(), rows in 2usize..=10, cols in 2usize..=10) {
        let mut r = rng(seed);
        let a: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        let f = truncated_svd(&TermDocMatrix::from_dense(&a), 20).unwrap();
        let oracle = gram_singular_values(&a);
        for (got, want) in f.singular_values.iter().zip(&oracle) {
            prop_assert!((got - want).abs() <= 1e-6 * want);
        }
        prop_assert_eq!(f.singular_values.len(), rows.min(cols));
        prop_assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
        // orthonormal basis with positive leading coordinate
        for (x, u) in f.term_basis.iter().enumerate() {
            prop_assert!(u.iter().find(|c| c.abs() > 1e-9).unwrap() > &0.0);
            for v in &f.term_basis[x..] {
                let dot: f64 = u.iter().zip(v).map(|(p, q)| p * q).sum();
                let want = if std::ptr::eq(u, v) { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() <= 1e-6);
            }
        }
        // reconstruction with every triple kept
        for (t, row) in a.iter().enumerate() {
            for (d, &value) in row.iter().enumerate() {
                let rebuilt: f64 = f.term_basis.iter().zip(&f.doc_coords[d]).map(|(u, c)| u[t] * c).sum();
                prop_assert!((rebuilt - value).abs() <= 1e-6);
            }
        }
        // increasing q never reduces the cluster count
        let mut last = 0;
        for q in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 1.0] {
            let n = discover_clusters(&f, q, 2).unwrap().clusters.len();
            prop_assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn assign_scale_invariant(seed in any::<u64>(), s in 0.01f64..100.0) {
        let (inputs, refs) = random_refs(seed, 30, 2);
        let stats = inputs.stats.clone().unwrap();
        let cols: Vec<SparseVector> = refs.iter().map(|x| tfidf(&x.doc, &stats).unwrap()).collect();
        let f = truncated_svd(&TermDocMatrix::from_columns(cols.clone()), 30).unwrap();
        let model = discover_clusters(&f, 0.8, 3).unwrap();
        for c in cols.iter().filter(|c| !c.is_empty()) {
            prop_assert_eq!(assign(c, &model).unwrap(), assign(&c.scaled(s), &model).unwrap());
        }
    }
}

#[test]
fn block_orthogonal_corpus_gives_two_clusters() {
    let titles = [
        "java developer",
        "java developer",
        "java developer",
        "registered nurse",
        "registered nurse",
        "registered nurse",
    ];
    let docs: Vec<titlesim::Document> = titles.iter().map(|t| titlesim::Document::new("x", *t)).collect();
    let stats = build_corpus_stats(&docs).unwrap();
    let cols: Vec<SparseVector> = docs.iter().map(|d| tfidf(d, &stats).unwrap()).collect();
    let f = truncated_svd(&TermDocMatrix::from_columns(cols.clone()), 10).unwrap();
    assert_eq!(f.singular_values.len(), 2);
    assert!((f.singular_values[0] - f.singular_values[1]).abs() < 1e-9);
    let model = discover_clusters(&f, 0.9, 2).unwrap();
    assert_eq!(model.clusters.len(), 2);
    assert_eq!(discover_clusters(&f, 0.5, 2).unwrap().clusters.len(), 1);
    assert_eq!(model.clusters.iter().map(|c| c.member_count).sum::<usize>(), 6);
}

#[test]
fn nearest_source_for_flat_index() {
    let (inputs, refs) = random_refs(5, 20, 2);
    let index = KnnIndex::build(refs, Strategy::BowCosine, inputs).unwrap();
    let q = index.refs()[3].doc.clone();
    let (src, n) = index.nearest(&q, 3).unwrap();
    assert!(std::ptr::eq(src, &index));
    assert!(n[0].dist.abs() < 1e-12);
}
