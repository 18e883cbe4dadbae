//! Exact balanced transportation solver and the document distances built on
//! it: Word Mover's Distance (WMD) and its centroid lower bound (WCD).
//!
//! The solver is the transportation simplex (a network simplex specialised to
//! the complete bipartite graph). The basis is always a spanning tree of
//! `m + n - 1` cells, degenerate zero-flow cells included. Pricing starts with
//! Dantzig's most-negative rule and falls back to Bland's lowest-index rule
//! after a run of degenerate pivots, which rules out cycling. All ties are
//! broken by the lowest row-major cell index, so the output is a function of
//! the input alone.

use std::collections::VecDeque;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::text_model::NBow;

/// Absolute tolerance on the difference between total supply and demand.
pub const MARGINAL_TOLERANCE: f64 = 1e-9;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(bad.len(), cols));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Weighted point set: one side of a transport instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidTransport(format!(
                "{} points with {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch(p.len(), dim));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidTransport("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidTransport(format!("weights sum to {total}")));
        }
        Ok(DiscreteDistribution { points, weights })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Pairwise Euclidean distances between the two point sets.
pub fn ground_cost_matrix(src: &DiscreteDistribution, dst: &DiscreteDistribution) -> Result<Matrix> {
    if src.dim() != dst.dim() {
        return Err(Error::DimensionMismatch(src.dim(), dst.dim()));
    }
    let mut cost = Matrix::zeros(src.points.len(), dst.points.len());
    for (i, p) in src.points.iter().enumerate() {
        for (j, q) in dst.points.iter().enumerate() {
            cost.set(i, j, euclidean(p, q));
        }
    }
    Ok(cost)
}

/// Optimal flow matrix and its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub flows: Matrix,
    pub objective: f64,
}

/// Solves `min Σ c_ij x_ij` subject to row sums = `supplies`, column sums =
/// `demands`, `x >= 0`.
pub fn solve_transport(supplies: &[f64], demands: &[f64], costs: &Matrix) -> Result<TransportPlan> {
    validate(supplies, demands, costs)?;
    let mut simplex = TransportSimplex::northwest_corner(supplies, demands, costs);
    simplex.optimize()?;
    Ok(simplex.into_plan())
}

fn validate(supplies: &[f64], demands: &[f64], costs: &Matrix) -> Result<()> {
    if supplies.is_empty() || demands.is_empty() {
        return Err(Error::InvalidTransport("empty marginals".into()));
    }
    if costs.rows() != supplies.len() || costs.cols() != demands.len() {
        return Err(Error::InvalidTransport(format!(
            "cost matrix is {}x{}, marginals are {}x{}",
            costs.rows(),
            costs.cols(),
            supplies.len(),
            demands.len()
        )));
    }
    if supplies
        .iter()
        .chain(demands)
        .any(|w| !(*w > 0.0 && w.is_finite()))
    {
        return Err(Error::InvalidTransport(
            "supplies and demands must be positive and finite".into(),
        ));
    }
    for i in 0..costs.rows() {
        for (j, &c) in costs.row(i).iter().enumerate() {
            if c.is_nan() || c.is_infinite() {
                return Err(Error::InvalidTransport(format!("non-finite cost at ({i}, {j})")));
            }
            if c < 0.0 {
                return Err(Error::NegativeCost {
                    row: i,
                    col: j,
                    value: c,
                });
            }
        }
    }
    let supply: f64 = supplies.iter().sum();
    let demand: f64 = demands.iter().sum();
    if (supply - demand).abs() > MARGINAL_TOLERANCE {
        return Err(Error::InfeasibleMarginals { supply, demand });
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Pricing {
    Dantzig,
    Bland,
}

struct TransportSimplex<'a> {
    m: usize,
    n: usize,
    costs: &'a Matrix,
    flow: Vec<f64>,
    basic: Vec<bool>,
    tolerance: f64,
}

impl<'a> TransportSimplex<'a> {
    /// Staircase start: always exactly `m + n - 1` basic cells forming a
    /// spanning tree, with zero-flow cells where supply and demand run out
    /// together.
    fn northwest_corner(supplies: &[f64], demands: &[f64], costs: &'a Matrix) -> Self {
        let (m, n) = (supplies.len(), demands.len());
        let mut flow = vec![0.0; m * n];
        let mut basic = vec![false; m * n];
        let mut s = supplies.to_vec();
        let mut d = demands.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let x = s[i].min(d[j]).max(0.0);
            flow[i * n + j] = x;
            basic[i * n + j] = true;
            s[i] -= x;
            d[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        let max_cost = costs.data.iter().copied().fold(0.0, f64::max);
        TransportSimplex {
            m,
            n,
            costs,
            flow,
            basic,
            tolerance: 1e-13 * max_cost,
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (cell, _) in self.basic.iter().enumerate().filter(|(_, b)| **b) {
            let (i, j) = (cell / self.n, cell % self.n);
            adj[i].push(cell);
            adj[self.m + j].push(cell);
        }
        adj
    }

    fn other_end(&self, node: usize, cell: usize) -> usize {
        let (i, j) = (cell / self.n, cell % self.n);
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    /// Row potentials followed by column potentials, `u_0 = 0`.
    fn potentials(&self, adj: &[Vec<usize>]) -> Vec<f64> {
        let mut pot = vec![0.0; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(node) = queue.pop_front() {
            for &cell in &adj[node] {
                let next = self.other_end(node, cell);
                if !seen[next] {
                    seen[next] = true;
                    pot[next] = self.costs.data[cell] - pot[node];
                    queue.push_back(next);
                }
            }
        }
        pot
    }

    fn entering(&self, pot: &[f64], pricing: Pricing) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for cell in 0..self.m * self.n {
            if self.basic[cell] {
                continue;
            }
            let (i, j) = (cell / self.n, cell % self.n);
            let reduced = self.costs.data[cell] - pot[i] - pot[self.m + j];
            if reduced < -self.tolerance {
                match pricing {
                    Pricing::Bland => return Some(cell),
                    Pricing::Dantzig => {
                        if best.map_or(true, |(_, r)| reduced < r) {
                            best = Some((cell, reduced));
                        }
                    }
                }
            }
        }
        best.map(|(cell, _)| cell)
    }

    /// Tree path between row `i` and column `j`, listed from the column end.
    fn tree_path(&self, adj: &[Vec<usize>], i: usize, j: usize) -> Vec<usize> {
        let target = self.m + j;
        let mut via: Vec<Option<usize>> = vec![None; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::from([i]);
        seen[i] = true;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &cell in &adj[node] {
                let next = self.other_end(node, cell);
                if !seen[next] {
                    seen[next] = true;
                    via[next] = Some(cell);
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != i {
            let cell = via[node].expect("basis is a spanning tree");
            path.push(cell);
            node = self.other_end(node, cell);
        }
        path
    }

    fn optimize(&mut self) -> Result<()> {
        let cells = self.m * self.n;
        let max_pivots = 1000 + 200 * cells * (self.m + self.n);
        let degenerate_limit = self.m + self.n;
        let mut pricing = Pricing::Dantzig;
        let mut degenerate_run = 0;
        for _ in 0..max_pivots {
            let adj = self.adjacency();
            let pot = self.potentials(&adj);
            let Some(enter) = self.entering(&pot, pricing) else {
                return Ok(());
            };
            let (ei, ej) = (enter / self.n, enter % self.n);
            let path = self.tree_path(&adj, ei, ej);

            // Path cells alternate -, +, -, ... starting next to column ej;
            // the entering cell closes the cycle with +.
            let mut theta = f64::INFINITY;
            let mut leave = usize::MAX;
            for &cell in path.iter().step_by(2) {
                let f = self.flow[cell];
                if f < theta || (f == theta && cell < leave) {
                    theta = f;
                    leave = cell;
                }
            }
            for (k, &cell) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[cell] -= theta;
                } else {
                    self.flow[cell] += theta;
                }
            }
            self.flow[enter] = theta;
            self.flow[leave] = 0.0;
            self.basic[enter] = true;
            self.basic[leave] = false;

            if theta == 0.0 {
                degenerate_run += 1;
                if degenerate_run > degenerate_limit {
                    pricing = Pricing::Bland;
                }
            } else {
                degenerate_run = 0;
            }
        }
        Err(Error::SolverStalled(max_pivots))
    }

    fn into_plan(self) -> TransportPlan {
        let mut flows = Matrix::zeros(self.m, self.n);
        let mut objective = 0.0;
        for cell in 0..self.m * self.n {
            let f = self.flow[cell].max(0.0);
            flows.data[cell] = f;
            objective += f * self.costs.data[cell];
        }
        TransportPlan { flows, objective }
    }
}

/// An nBOW restricted to in-vocabulary tokens, with weights renormalized and
/// the weighted centroid precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedNBow {
    rows: Vec<usize>,
    weights: Vec<f64>,
    centroid: Vec<f64>,
}

impl EmbeddedNBow {
    pub fn new(nbow: &NBow, table: &EmbeddingTable) -> Result<Self> {
        let (rows, raw): (Vec<usize>, Vec<f64>) = nbow
            .entries()
            .iter()
            .filter_map(|(t, w)| table.index_of(t).map(|r| (r, *w)))
            .unzip();
        if rows.is_empty() {
            return Err(Error::NoEmbeddableTokens);
        }
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mut centroid = vec![0.0; table.dim()];
        for (&r, &w) in rows.iter().zip(&weights) {
            for (c, x) in centroid.iter_mut().zip(table.row(r)) {
                *c += w * x;
            }
        }
        Ok(EmbeddedNBow {
            rows,
            weights,
            centroid,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    pub fn support_size(&self) -> usize {
        self.rows.len()
    }

    pub fn to_distribution(&self, table: &EmbeddingTable) -> Result<DiscreteDistribution> {
        DiscreteDistribution::new(
            self.rows.iter().map(|&r| table.row(r).to_vec()).collect(),
            self.weights.clone(),
        )
    }

    pub fn wmd(&self, other: &EmbeddedNBow, table: &EmbeddingTable) -> Result<f64> {
        let mut cost = Matrix::zeros(self.rows.len(), other.rows.len());
        for (i, &a) in self.rows.iter().enumerate() {
            for (j, &b) in other.rows.iter().enumerate() {
                cost.set(i, j, euclidean(table.row(a), table.row(b)));
            }
        }
        Ok(solve_transport(&self.weights, &other.weights, &cost)?.objective)
    }

    pub fn wcd(&self, other: &EmbeddedNBow) -> f64 {
        euclidean(&self.centroid, &other.centroid)
    }
}

/// Word Mover's Distance between two documents. Out-of-vocabulary tokens are
/// dropped and the remaining mass renormalized.
pub fn wmd(a: &NBow, b: &NBow, table: &EmbeddingTable) -> Result<f64> {
    EmbeddedNBow::new(a, table)?.wmd(&EmbeddedNBow::new(b, table)?, table)
}

/// Word Centroid Distance: Euclidean distance between weighted centroids.
/// Never exceeds [`wmd`] on the same pair.
pub fn wcd(a: &NBow, b: &NBow, table: &EmbeddingTable) -> Result<f64> {
    Ok(EmbeddedNBow::new(a, table)?.wcd(&EmbeddedNBow::new(b, table)?))
}
