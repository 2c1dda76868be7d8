#![allow(dead_code)]

use opfrelax::chordal::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Connected random graph: a random spanning tree plus each other pair with probability `p`.
pub fn random_connected_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(n);
    for v in 1..n {
        g.add_edge(v, rng.gen_range(0..v));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                g.add_edge(a, b);
            }
        }
    }
    g
}

/// Vertices reachable from `start` in the undirected tree on `k` nodes, restricted to `allowed`.
pub fn tree_component(k: usize, tree: &[(usize, usize, usize)], allowed: &[bool], start: usize) -> Vec<bool> {
    let mut seen = vec![false; k];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for &(a, b, _) in tree {
            let other = if a == i { b } else if b == i { a } else { continue };
            if allowed[other] && !seen[other] {
                seen[other] = true;
                stack.push(other);
            }
        }
    }
    seen
}
