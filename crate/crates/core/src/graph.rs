//! Graph abstractions of a problem instance: the variable graph with its
//! per-node feature matrix, and the bipartite variable-constraint graph.
//! These are the classifier's input representation.

use crate::model::{Domain, Problem, VariableMeta};
use serde::{Deserialize, Serialize};

pub const N_FEATURES: usize = 5;

/// Undirected graph over the decision variables. Two variables are joined
/// iff they co-occur in some constraint body or in the objective. Each node
/// carries the 5-entry 0/1 feature row of [`variable_features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableGraph {
    pub n_nodes: usize,
    /// Unordered pairs `(i, j)` with `i < j`, sorted, no duplicates.
    pub edges: Vec<(usize, usize)>,
    /// One row per node, row-major.
    pub features: Vec<[u8; N_FEATURES]>,
}

/// Bipartite variable-constraint graph. The objective is appended as the
/// last constraint node, so `n_cons == m + 1` for a problem with `m`
/// constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub n_vars: usize,
    pub n_cons: usize,
    /// Pairs `(variable index, constraint index)`.
    pub edges: Vec<(usize, usize)>,
}

/// Feature row of a variable:
/// `(continuous, binary, integer, has upper bound, has lower bound)`.
/// The first three entries one-hot encode the domain; binary and integer
/// variables are implicitly bounded, so both bound flags are set for them.
pub fn variable_features(v: &VariableMeta) -> [u8; N_FEATURES] {
    match v.domain {
        Domain::Binary => [0, 1, 0, 1, 1],
        Domain::Integer => [0, 0, 1, 1, 1],
        Domain::Continuous => [
            1,
            0,
            0,
            u8::from(v.upper.is_some()),
            u8::from(v.lower.is_some()),
        ],
    }
}

fn coupling_groups(p: &Problem) -> impl Iterator<Item = Vec<usize>> + '_ {
    p.constraints
        .iter()
        .map(|c| c.body.variables())
        .chain(std::iter::once(p.objective.variables()))
}

/// Build the variable graph of `p`. The objective contributes coupling
/// edges like one extra constraint.
pub fn build_variable_graph(p: &Problem) -> VariableGraph {
    let n = p.n_vars();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for group in coupling_groups(p) {
        for (a, &i) in group.iter().enumerate() {
            for &j in &group[a + 1..] {
                edges.push((i.min(j), i.max(j)));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    VariableGraph {
        n_nodes: n,
        edges,
        features: p.variables.iter().map(variable_features).collect(),
    }
}

/// Build the bipartite graph of `p`, with the objective as constraint node
/// `m` (the last one).
pub fn build_bipartite_graph(p: &Problem) -> BipartiteGraph {
    let m = p.constraints.len();
    let mut edges = Vec::new();
    for (j, c) in p.constraints.iter().enumerate() {
        for i in c.body.variables() {
            edges.push((i, j));
        }
    }
    for i in p.objective.variables() {
        edges.push((i, m));
    }
    edges.sort_unstable();
    edges.dedup();
    BipartiteGraph {
        n_vars: p.n_vars(),
        n_cons: m + 1,
        edges,
    }
}

impl VariableGraph {
    /// Dense symmetric adjacency with zero diagonal.
    pub fn adjacency(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n_nodes]; self.n_nodes];
        for &(i, j) in &self.edges {
            a[i][j] = 1.0;
            a[j][i] = 1.0;
        }
        a
    }

    /// Relabel nodes: node `i` becomes `perm[i]`. Edges and feature rows
    /// move together, which is what the classifier's permutation-invariance
    /// checks exercise.
    pub fn permuted(&self, perm: &[usize]) -> VariableGraph {
        assert_eq!(perm.len(), self.n_nodes);
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (perm[i], perm[j]);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let mut features = vec![[0u8; N_FEATURES]; self.n_nodes];
        for (i, row) in self.features.iter().enumerate() {
            features[perm[i]] = *row;
        }
        VariableGraph {
            n_nodes: self.n_nodes,
            edges,
            features,
        }
    }

    /// Inspection export: `{n_nodes, edges, features}` as JSON.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph serialization");
        s.push('\n');
        s
    }
}
