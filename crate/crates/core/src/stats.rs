//! Descriptive statistics for triple graphs.
//!
//! Nodes are the distinct non-literal terms in subject or object position;
//! predicates only count as nodes when they also occur there. Density uses
//! the directed formula `m / (n (n - 1))`.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::rdf::{TermId, TripleGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub triples: u64,
    pub nodes: u64,
    pub relations: u64,
    pub self_loops: u64,
    pub average_degree: f64,
    pub density: f64,
    pub connected_components: u64,
}

pub fn average_degree(triples: u64, nodes: u64) -> f64 {
    if nodes == 0 {
        0.0
    } else {
        triples as f64 / nodes as f64
    }
}

pub fn density(triples: u64, nodes: u64) -> f64 {
    if nodes < 2 {
        0.0
    } else {
        triples as f64 / (nodes as f64 * (nodes - 1) as f64)
    }
}

/// Union-find with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Returns true when the two elements were in different sets.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
        true
    }
}

pub fn compute_stats(graph: &TripleGraph) -> GraphStats {
    let cap = graph.term_capacity();
    let mut is_node = vec![false; cap];
    let mut predicates: HashSet<TermId> = HashSet::new();
    let mut self_loops = 0u64;
    let mut dsu = DisjointSet::new(cap);
    let mut merges = 0u64;
    for [s, p, o] in graph.id_triples() {
        predicates.insert(p);
        if s == o {
            self_loops += 1;
        }
        is_node[s.index()] = true;
        if !graph.term(o).is_literal() {
            is_node[o.index()] = true;
            if dsu.union(s.0, o.0) {
                merges += 1;
            }
        }
    }
    let nodes = is_node.iter().filter(|&&n| n).count() as u64;
    let triples = graph.len() as u64;
    GraphStats {
        triples,
        nodes,
        relations: predicates.len() as u64,
        self_loops,
        average_degree: average_degree(triples, nodes),
        density: density(triples, nodes),
        connected_components: nodes - merges,
    }
}

/// Aligned text table with one row per named record.
pub fn render_table(rows: &[(String, GraphStats)]) -> String {
    let name_width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_width$}  {:>12}  {:>12}  {:>9}  {:>10}  {:>14}  {:>12}  {:>10}",
        "build", "triples", "nodes", "relations", "self-loops", "average-degree", "density", "components"
    );
    for (name, s) in rows {
        let _ = writeln!(
            out,
            "{:<name_width$}  {:>12}  {:>12}  {:>9}  {:>10}  {:>14.2}  {:>12.3e}  {:>10}",
            name, s.triples, s.nodes, s.relations, s.self_loops, s.average_degree, s.density, s.connected_components
        );
    }
    out
}
