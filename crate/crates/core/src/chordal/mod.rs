//! Chordal sparsity: extension, maximal cliques, clique trees, clique merging,
//! PSD completion and the clique-decomposed SDP.

mod completion;
mod sdp;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::Network;

pub use completion::{assemble_w, expand_real, psd_complete, PartialMatrix};
pub use sdp::{emit_chordal_sdp, reconstruct_chordal, ChordalHandles};

#[derive(Debug, Error, PartialEq)]
pub enum ChordalError {
    #[error("graph is not chordal under the given elimination ordering")]
    NotChordal,
    #[error("clique graph is disconnected")]
    DisconnectedCliqueGraph,
    #[error("no clique contains the pair ({0}, {1})")]
    MissingOwner(usize, usize),
    #[error("decomposition has {got} vertices but the network has {expected} buses")]
    SizeMismatch { expected: usize, got: usize },
}

/// Simple undirected graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    adj: Vec<BTreeSet<usize>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { adj: vec![BTreeSet::new(); n] }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Graph::new(n);
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn from_network(net: &Network) -> Self {
        Graph::from_edges(net.n_buses(), net.lines.iter().map(|l| (l.from, l.to)))
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, nb) in self.adj.iter().enumerate() {
            out.extend(nb.range(a + 1..).map(|&b| (a, b)));
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn is_supergraph_of(&self, other: &Graph) -> bool {
        self.n() == other.n() && other.edges().into_iter().all(|(a, b)| self.has_edge(a, b))
    }

    pub fn is_connected(&self) -> bool {
        if self.n() == 0 {
            return true;
        }
        let mut seen = vec![false; self.n()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Symbolic elimination in a minimum-degree order fixed up front (vertices
/// sorted by their original degree, ties by index). Returns the filled graph
/// and the elimination order, which is a perfect elimination ordering of it.
pub fn chordal_extension(graph: &Graph) -> (Graph, Vec<usize>) {
    let mut order: Vec<usize> = (0..graph.n()).collect();
    order.sort_by_key(|&v| graph.degree(v));
    let mut pos = vec![0; graph.n()];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    let mut filled = graph.clone();
    for &v in &order {
        let later: Vec<usize> = filled.adj[v].iter().copied().filter(|&w| pos[w] > pos[v]).collect();
        for (i, &a) in later.iter().enumerate() {
            for &b in &later[i + 1..] {
                filled.add_edge(a, b);
            }
        }
    }
    (filled, order)
}

fn positions(order: &[usize]) -> Vec<usize> {
    let mut pos = vec![usize::MAX; order.len()];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    pos
}

/// Whether `order` is a perfect elimination ordering of `graph`.
pub fn is_perfect_elimination_ordering(graph: &Graph, order: &[usize]) -> bool {
    if order.len() != graph.n() {
        return false;
    }
    let pos = positions(order);
    if pos.iter().any(|&p| p == usize::MAX) {
        return false;
    }
    order.iter().all(|&v| {
        let later: Vec<usize> = graph.adj[v].iter().copied().filter(|&w| pos[w] > pos[v]).collect();
        later.iter().enumerate().all(|(i, &a)| later[i + 1..].iter().all(|&b| graph.has_edge(a, b)))
    })
}

/// Maximum cardinality search; the reverse of its visit order is a perfect
/// elimination ordering exactly when the graph is chordal.
pub fn mcs_order(graph: &Graph) -> Vec<usize> {
    let n = graph.n();
    let mut weight = vec![0usize; n];
    let mut done = vec![false; n];
    let mut visit = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n).filter(|&v| !done[v]).max_by_key(|&v| (weight[v], std::cmp::Reverse(v))).unwrap();
        done[v] = true;
        visit.push(v);
        for &w in &graph.adj[v] {
            if !done[w] {
                weight[w] += 1;
            }
        }
    }
    visit.reverse();
    visit
}

pub fn is_chordal(graph: &Graph) -> bool {
    is_perfect_elimination_ordering(graph, &mcs_order(graph))
}

/// Maximal cliques `{v} ∪ later-neighbours(v)` of a chordal graph, ordered by
/// the position of their generating vertex. Vertex lists are sorted.
pub fn maximal_cliques(graph: &Graph, peo: &[usize]) -> Result<Vec<Vec<usize>>, ChordalError> {
    if !is_perfect_elimination_ordering(graph, peo) {
        return Err(ChordalError::NotChordal);
    }
    let pos = positions(peo);
    let candidates: Vec<BTreeSet<usize>> = peo
        .iter()
        .map(|&v| {
            let mut c: BTreeSet<usize> = graph.adj[v].iter().copied().filter(|&w| pos[w] > pos[v]).collect();
            c.insert(v);
            c
        })
        .collect();
    Ok(candidates
        .iter()
        .enumerate()
        .filter(|&(i, c)| !candidates.iter().enumerate().any(|(j, d)| j != i && d.len() > c.len() && c.is_subset(d)))
        .map(|(_, c)| c.iter().copied().collect())
        .collect())
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Maximum-weight spanning tree of the clique graph, weights `|C_i ∩ C_j|`.
/// Returns edges `(i, j, weight)` with `i < j`. Ties prefer smaller indices.
pub fn clique_tree(cliques: &[Vec<usize>]) -> Result<Vec<(usize, usize, usize)>, ChordalError> {
    let k = cliques.len();
    let mut candidates = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let w = intersection_size(&cliques[i], &cliques[j]);
            if w > 0 {
                candidates.push((i, j, w));
            }
        }
    }
    candidates.sort_by_key(|&(i, j, w)| (std::cmp::Reverse(w), i, j));
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut tree = Vec::with_capacity(k.saturating_sub(1));
    for (i, j, w) in candidates {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            tree.push((i, j, w));
        }
    }
    if tree.len() + 1 < k {
        return Err(ChordalError::DisconnectedCliqueGraph);
    }
    Ok(tree)
}

/// Whether, for every vertex, the cliques containing it induce a connected subtree.
pub fn has_running_intersection(cliques: &[Vec<usize>], tree: &[(usize, usize, usize)]) -> bool {
    let vertices: BTreeSet<usize> = cliques.iter().flatten().copied().collect();
    vertices.into_iter().all(|v| {
        let holders: Vec<usize> = (0..cliques.len()).filter(|&i| cliques[i].binary_search(&v).is_ok()).collect();
        let inside = |i: usize| cliques[i].binary_search(&v).is_ok();
        let mut seen = BTreeSet::from([holders[0]]);
        let mut stack = vec![holders[0]];
        while let Some(c) = stack.pop() {
            for &(a, b, _) in tree {
                let other = if a == c { b } else if b == c { a } else { continue };
                if inside(other) && seen.insert(other) {
                    stack.push(other);
                }
            }
        }
        seen.len() == holders.len()
    })
}

/// Number of scalar entries in a symmetric block of size `k`.
pub fn gamma(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Change in problem size when merging two adjacent cliques.
pub fn merge_delta(a: &[usize], b: &[usize]) -> i64 {
    let inter = intersection_size(a, b);
    let union = a.len() + b.len() - inter;
    gamma(union) as i64 - gamma(a.len()) as i64 - gamma(b.len()) as i64 - gamma(inter) as i64
}

fn sorted_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    intersection_size(a, b) == a.len()
}

/// A chordal extension of a graph together with its maximal cliques, a clique
/// tree and a perfect elimination ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueDecomposition {
    pub chordal: Graph,
    /// Sorted vertex lists.
    pub cliques: Vec<Vec<usize>>,
    /// `(i, j, |C_i ∩ C_j|)` with `i < j`.
    pub tree: Vec<(usize, usize, usize)>,
    pub peo: Vec<usize>,
}

impl CliqueDecomposition {
    pub fn from_graph(graph: &Graph) -> Result<Self, ChordalError> {
        let (chordal, peo) = chordal_extension(graph);
        let cliques = maximal_cliques(&chordal, &peo)?;
        let tree = clique_tree(&cliques)?;
        Ok(CliqueDecomposition { chordal, cliques, tree, peo })
    }

    pub fn for_network(net: &Network) -> Result<Self, ChordalError> {
        Self::from_graph(&Graph::from_network(net))
    }

    pub fn n_vertices(&self) -> usize {
        self.chordal.n()
    }

    /// Smallest clique index containing both `v` and `w` (`v == w` allowed).
    pub fn owner(&self, v: usize, w: usize) -> Option<usize> {
        self.cliques
            .iter()
            .position(|c| c.binary_search(&v).is_ok() && c.binary_search(&w).is_ok())
    }

    /// Greedily merges the tree edge with the smallest size change until at most
    /// `max(1, ⌈fraction·k₀⌉)` cliques remain, then absorbs any clique contained
    /// in a tree neighbour and rebuilds the chordal graph and elimination order.
    pub fn merge(self, fraction: f64) -> Self {
        let k0 = self.cliques.len();
        let target = ((fraction * k0 as f64).ceil() as usize).max(1);
        let mut cliques = self.cliques;
        let mut edges: Vec<(usize, usize)> = self.tree.iter().map(|&(i, j, _)| (i, j)).collect();
        let mut alive = vec![true; cliques.len()];
        let mut count = k0;

        let contract = |cliques: &mut Vec<Vec<usize>>, edges: &mut Vec<(usize, usize)>, alive: &mut Vec<bool>, keep: usize, gone: usize| {
            let merged = sorted_union(&cliques[keep], &cliques[gone]);
            cliques[keep] = merged;
            cliques[gone].clear();
            alive[gone] = false;
            edges.retain(|&(a, b)| !((a == keep && b == gone) || (a == gone && b == keep)));
            for e in edges.iter_mut() {
                if e.0 == gone {
                    e.0 = keep;
                }
                if e.1 == gone {
                    e.1 = keep;
                }
                if e.0 > e.1 {
                    *e = (e.1, e.0);
                }
            }
        };

        while count > target {
            let (i, j) = *edges
                .iter()
                .min_by_key(|&&(i, j)| (merge_delta(&cliques[i], &cliques[j]), i, j))
                .expect("a tree with several cliques has edges");
            contract(&mut cliques, &mut edges, &mut alive, i, j);
            count -= 1;
        }
        while let Some(&(i, j)) = edges
            .iter()
            .find(|&&(i, j)| is_subset(&cliques[i], &cliques[j]) || is_subset(&cliques[j], &cliques[i]))
        {
            let (keep, gone) = if is_subset(&cliques[j], &cliques[i]) { (i, j) } else { (j, i) };
            contract(&mut cliques, &mut edges, &mut alive, keep, gone);
        }

        let mut remap = vec![usize::MAX; cliques.len()];
        let mut kept = Vec::new();
        for (i, c) in cliques.into_iter().enumerate() {
            if alive[i] {
                remap[i] = kept.len();
                kept.push(c);
            }
        }
        let tree: Vec<(usize, usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| {
                let (a, b) = (remap[a].min(remap[b]), remap[a].max(remap[b]));
                (a, b, intersection_size(&kept[a], &kept[b]))
            })
            .collect();
        let mut chordal = Graph::new(self.chordal.n());
        for c in &kept {
            for (x, &a) in c.iter().enumerate() {
                for &b in &c[x + 1..] {
                    chordal.add_edge(a, b);
                }
            }
        }
        let peo = tree_elimination_order(&kept, &tree, chordal.n());
        CliqueDecomposition { chordal, cliques: kept, tree, peo }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decomposition serializes")
    }
}

/// Elimination order read off a clique tree rooted at clique 0: cliques in
/// post-order, each contributing the vertices it does not share with its parent.
fn tree_elimination_order(cliques: &[Vec<usize>], tree: &[(usize, usize, usize)], n: usize) -> Vec<usize> {
    let k = cliques.len();
    let mut adj = vec![Vec::new(); k];
    for &(a, b, _) in tree {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut parent = vec![usize::MAX; k];
    let mut pre = Vec::with_capacity(k);
    let mut stack = vec![0];
    let mut seen = vec![false; k];
    seen[0] = true;
    while let Some(c) = stack.pop() {
        pre.push(c);
        for &d in adj[c].iter().rev() {
            if !seen[d] {
                seen[d] = true;
                parent[d] = c;
                stack.push(d);
            }
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    // Reversed pre-order lists every child before its parent.
    for &c in pre.iter().rev() {
        for &v in &cliques[c] {
            let shared = parent[c] != usize::MAX && cliques[parent[c]].binary_search(&v).is_ok();
            if !shared && !placed[v] {
                placed[v] = true;
                order.push(v);
            }
        }
    }
    order
}
