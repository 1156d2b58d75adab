//! Industry relationship graph: one clique per industry, with self-loop
//! inclusive degrees and the symmetric normalization used by graph convolution.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use crate::autodiff::{Matrix, SparseMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct IndustryGraph {
    stocks: Vec<String>,
    /// Sorted neighbor lists, self excluded.
    neighbors: Vec<Vec<usize>>,
}

impl IndustryGraph {
    /// Nodes are numbered in `stock_id` order.
    pub fn build(industries: &BTreeMap<String, String>) -> Result<Self> {
        if industries.is_empty() {
            return Err(Error::Data("cannot build a graph with no stocks".into()));
        }
        let stocks: Vec<String> = industries.keys().cloned().collect();
        let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, ind) in industries.values().enumerate() {
            members.entry(ind.as_str()).or_default().push(i);
        }
        let mut neighbors = vec![Vec::new(); stocks.len()];
        for group in members.values() {
            for &i in group {
                neighbors[i].extend(group.iter().copied().filter(|&j| j != i));
            }
        }
        Ok(IndustryGraph { stocks, neighbors })
    }

    /// Arbitrary undirected graph over `stocks` (node `i` is `stocks[i]`).
    /// Duplicate edges collapse; self-loops are rejected since every node
    /// already carries one implicitly.
    pub fn from_edges(stocks: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = stocks.len();
        if n == 0 {
            return Err(Error::Data("cannot build a graph with no stocks".into()));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Index {
                    op: "from_edges",
                    index: a.max(b),
                    len: n,
                });
            }
            if a == b {
                return Err(Error::Contract(format!("explicit self-loop on node {a}")));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for ns in &mut neighbors {
            ns.sort_unstable();
            ns.dedup();
        }
        Ok(IndustryGraph { stocks, neighbors })
    }

    pub fn node_count(&self) -> usize {
        self.stocks.len()
    }

    pub fn stock_id(&self, node: usize) -> &str {
        &self.stocks[node]
    }

    pub fn node_of(&self, stock: &str) -> Option<usize> {
        self.stocks.binary_search_by(|s| s.as_str().cmp(stock)).ok()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    /// Self-loop inclusive degree.
    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len() + 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges `(a, b)` with `a < b`, in node order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (a, ns) in self.neighbors.iter().enumerate() {
            out.extend(ns.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// `√(deg(j)·deg(s))` for `j` a neighbor of `s` or `s` itself.
    pub fn sym_norm_coefficient(&self, j: usize, s: usize) -> Result<f64> {
        if j >= self.node_count() || s >= self.node_count() {
            return Err(Error::Index {
                op: "sym_norm_coefficient",
                index: j.max(s),
                len: self.node_count(),
            });
        }
        if j != s && self.neighbors[s].binary_search(&j).is_err() {
            return Err(Error::Contract(format!(
                "node {j} is neither {s} nor one of its neighbors"
            )));
        }
        Ok(((self.degree(j) * self.degree(s)) as f64).sqrt())
    }

    /// Sparse `D^{-1/2}(A + I)D^{-1/2}`: row `s` holds `1/r_{j,s}` for
    /// `j ∈ N(s) ∪ {s}`, with columns in ascending order.
    pub fn normalized_operator(&self) -> Arc<SparseMatrix> {
        let entries = (0..self.node_count())
            .map(|s| {
                let mut cols: Vec<usize> = self.neighbors[s].clone();
                cols.push(s);
                cols.sort_unstable();
                cols.into_iter()
                    .map(|j| (j, 1.0 / ((self.degree(j) * self.degree(s)) as f64).sqrt()))
                    .collect()
            })
            .collect();
        Arc::new(SparseMatrix::from_row_entries(self.node_count(), entries).expect("in range"))
    }

    /// Dense normalized adjacency built from the 0/1 adjacency and degree
    /// matrices directly.
    pub fn to_dense_normalized(&self) -> Matrix {
        let n = self.node_count();
        let mut a_hat = Matrix::identity(n);
        for (s, ns) in self.neighbors.iter().enumerate() {
            for &j in ns {
                a_hat.set(s, j, 1.0);
            }
        }
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|i| {
                let d: f64 = a_hat.row(i).iter().sum();
                1.0 / d.sqrt()
            })
            .collect();
        let mut out = Matrix::zeros(n, n);
        for s in 0..n {
            for j in 0..n {
                out.set(s, j, inv_sqrt[s] * a_hat.get(s, j) * inv_sqrt[j]);
            }
        }
        out
    }

    /// Edge list `stock_a,stock_b`, one edge per line, lexicographic.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut pairs: Vec<(&str, &str)> = self
            .edges()
            .into_iter()
            .map(|(a, b)| (self.stocks[a].as_str(), self.stocks[b].as_str()))
            .collect();
        pairs.sort_unstable();
        for (a, b) in pairs {
            writeln!(out, "{a},{b}")?;
        }
        Ok(())
    }
}
