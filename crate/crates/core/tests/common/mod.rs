//! Independent oracles and synthetic data shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use titlesim::{Document, EmbeddingTable};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minimum of the transportation LP by enumerating every spanning tree of the
/// bipartite row/column graph. Each tree fixes a unique basic solution
/// (obtained by peeling leaves); the optimum is the cheapest feasible one.
pub fn lp_vertex_oracle(supplies: &[f64], demands: &[f64], costs: &[Vec<f64>]) -> f64 {
    let (m, n) = (supplies.len(), demands.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(m + n - 1);
    let parent: Vec<usize> = (0..m + n).collect();
    enumerate_trees(&cells, 0, m + n - 1, &mut chosen, parent, &mut |tree| {
        if let Some(obj) = basic_solution(tree, supplies, demands, costs) {
            best = best.min(obj);
        }
    });
    best
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn enumerate_trees(
    cells: &[(usize, usize)],
    start: usize,
    need: usize,
    chosen: &mut Vec<(usize, usize)>,
    parent: Vec<usize>,
    visit: &mut dyn FnMut(&[(usize, usize)]),
) {
    if need == 0 {
        visit(chosen);
        return;
    }
    let m = cells.iter().map(|c| c.0).max().unwrap() + 1;
    for idx in start..cells.len() {
        if cells.len() - idx < need {
            break;
        }
        let (i, j) = cells[idx];
        let mut p = parent.clone();
        let (a, b) = (find(&mut p, i), find(&mut p, m + j));
        if a == b {
            continue;
        }
        p[a] = b;
        chosen.push((i, j));
        enumerate_trees(cells, idx + 1, need - 1, chosen, p, visit);
        chosen.pop();
    }
}

fn basic_solution(tree: &[(usize, usize)], s: &[f64], d: &[f64], c: &[Vec<f64>]) -> Option<f64> {
    let m = s.len();
    let mut remaining: Vec<f64> = s.iter().chain(d).copied().collect();
    let mut alive = vec![true; tree.len()];
    let mut degree = vec![0usize; remaining.len()];
    for &(i, j) in tree {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut objective = 0.0;
    for _ in 0..tree.len() {
        let (e, leaf) = tree.iter().enumerate().find_map(|(e, &(i, j))| {
            if !alive[e] {
                None
            } else if degree[i] == 1 {
                Some((e, i))
            } else if degree[m + j] == 1 {
                Some((e, m + j))
            } else {
                None
            }
        })?;
        let (i, j) = tree[e];
        let other = if leaf == i { m + j } else { i };
        let x = remaining[leaf];
        if x < -1e-12 {
            return None;
        }
        remaining[other] -= x;
        remaining[leaf] = 0.0;
        alive[e] = false;
        degree[i] -= 1;
        degree[m + j] -= 1;
        objective += x * c[i][j];
    }
    Some(objective)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = cos * akp - sin * akq;
                    a[k][q] = sin * akp + cos * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = cos * apk - sin * aqk;
                    a[q][k] = sin * apk + cos * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Singular values of `rows` (descending) from the eigenvalues of its Gram
/// matrix `AᵀA`.
pub fn gram_singular_values(rows: &[Vec<f64>]) -> Vec<f64> {
    let cols = rows[0].len();
    let gram: Vec<Vec<f64>> = (0..cols)
        .map(|a| {
            (0..cols)
                .map(|b| rows.iter().map(|r| r[a] * r[b]).sum())
                .collect()
        })
        .collect();
    let mut s: Vec<f64> = jacobi_eigenvalues(gram)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn random_simplex(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// `words` random words `w00..` with coordinates uniform in [-1, 1].
pub fn planted_table(rng: &mut impl Rng, words: usize, dim: usize) -> EmbeddingTable {
    EmbeddingTable::from_rows(
        dim,
        (0..words).map(|w| {
            (
                format!("w{w:02}"),
                (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        }),
    )
    .unwrap()
}

/// Random title of `1..=max_len` words drawn from `table`.
pub fn random_doc(rng: &mut impl Rng, id: String, table: &EmbeddingTable, max_len: usize) -> Document {
    let len = rng.gen_range(1..=max_len);
    let words: Vec<&str> = (0..len)
        .map(|_| table.words()[rng.gen_range(0..table.len())].as_str())
        .collect();
    Document::new(id, words.join(" "))
}

/// Embedding file for the "Senior Java Programmer, NY" mini knowledge base.
/// Software words share one direction, place words another, and the
/// distractor occupations sit far away from both.
pub const WORKED_EXAMPLE_EMBEDDINGS: &str = "\
20 4
senior 0.3 0.1 0.0 0.3
java 1.0 0.8 0.0 0.0
programmer 1.0 0.2 0.3 0.0
ny 0.0 0.0 0.1 1.0
entry 0.3 0.1 0.0 0.2
level 0.3 0.0 0.0 0.2
developer 1.0 0.5 0.0 0.0
matlab 0.8 0.0 1.0 0.0
new 0.0 0.0 0.1 0.9
york 0.0 0.0 0.1 1.0
j2ee 0.9 0.9 0.0 0.0
engineer 0.9 0.4 0.2 0.0
registered -1.0 0.1 -0.5 0.0
nurse -1.0 0.0 -0.6 0.1
truck -0.2 -1.0 -0.8 0.0
driver -0.1 -1.0 -0.9 0.0
staff -0.6 -0.6 -0.1 0.0
accountant -0.5 -0.3 -1.0 0.0
retail -0.9 -0.5 0.0 0.0
associate -0.8 -0.5 0.1 0.0
";

/// `id \t title \t fine_label \t coarse_label` rows of the mini knowledge base.
pub const WORKED_EXAMPLE_REFS: &str = "\
r1\tEntry-level Java Developer\tJava Developer\t15
r2\tMatlab programmer New york\tMatlab Developer\t15
r3\tJ2EE engineer\tJava Developer\t15
r4\tRegistered Nurse\tRegistered Nurse\t29
r5\tTruck Driver\tTruck Driver\t53
r6\tStaff Accountant\tAccountant\t13
r7\tRetail Associate\tRetail Sales\t41
";

pub const WORKED_EXAMPLE_QUERIES: &str = "q1\tSenior Java Programmer, NY\tJava Developer\n";
