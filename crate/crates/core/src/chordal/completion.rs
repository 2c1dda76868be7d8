//! Assembly of clique blocks into a partial matrix and its PSD completion.

use nalgebra::DMatrix;

use super::Graph;

/// Symmetric matrix with a mask of known entries.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialMatrix {
    pub values: DMatrix<f64>,
    pub known: DMatrix<bool>,
}

/// Averages each entry over all cliques that contain both of its indices.
/// `cliques[i]` lists the global indices of the rows and columns of `blocks[i]`.
pub fn assemble_w(cliques: &[Vec<usize>], blocks: &[DMatrix<f64>], n: usize) -> PartialMatrix {
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut count = DMatrix::<u32>::zeros(n, n);
    for (clique, block) in cliques.iter().zip(blocks) {
        for (a, &i) in clique.iter().enumerate() {
            for (b, &j) in clique.iter().enumerate() {
                sum[(i, j)] += block[(a, b)];
                count[(i, j)] += 1;
            }
        }
    }
    let known = count.map(|c| c > 0);
    let values = DMatrix::from_fn(n, n, |i, j| if count[(i, j)] > 0 { sum[(i, j)] / count[(i, j)] as f64 } else { 0.0 });
    PartialMatrix { values, known }
}

/// Pseudoinverse dropping singular values below `1e-9·σ_max`.
fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = (smax * 1e-9).max(1e-14);
    svd.pseudo_inverse(tol).expect("SVD computed with both factors")
}

/// Fills the unknown entries so that the result is PSD whenever the known
/// entries admit a PSD completion. `graph` must be chordal with `peo` one of
/// its perfect elimination orderings, and its edges must be known entries.
pub fn psd_complete(partial: &PartialMatrix, graph: &Graph, peo: &[usize]) -> DMatrix<f64> {
    let mut w = partial.values.clone();
    let mut processed: Vec<usize> = Vec::with_capacity(peo.len());
    for &v in peo.iter().rev() {
        let (u, t): (Vec<usize>, Vec<usize>) = processed.iter().partition(|&&x| graph.has_edge(v, x));
        if !t.is_empty() {
            if u.is_empty() {
                for &x in &t {
                    w[(v, x)] = 0.0;
                    w[(x, v)] = 0.0;
                }
            } else {
                let w_su = DMatrix::from_fn(1, u.len(), |_, b| w[(v, u[b])]);
                let w_uu = DMatrix::from_fn(u.len(), u.len(), |a, b| w[(u[a], u[b])]);
                let w_ut = DMatrix::from_fn(u.len(), t.len(), |a, b| w[(u[a], t[b])]);
                let fill = w_su * pinv(&w_uu) * w_ut;
                for (b, &x) in t.iter().enumerate() {
                    w[(v, x)] = fill[(0, b)];
                    w[(x, v)] = fill[(0, b)];
                }
            }
        }
        processed.push(v);
    }
    w
}

/// Graph and elimination order of the `2n` real form: vertex `v` becomes
/// `2v` and `2v + 1`, which are adjacent to each other and to both copies of
/// every neighbour of `v`.
pub fn expand_real(graph: &Graph, peo: &[usize]) -> (Graph, Vec<usize>) {
    let mut g = Graph::new(2 * graph.n());
    for v in 0..graph.n() {
        g.add_edge(2 * v, 2 * v + 1);
    }
    for (a, b) in graph.edges() {
        for i in 0..2 {
            for j in 0..2 {
                g.add_edge(2 * a + i, 2 * b + j);
            }
        }
    }
    (g, peo.iter().flat_map(|&v| [2 * v, 2 * v + 1]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chordal::{chordal_extension, is_perfect_elimination_ordering};

    #[test]
    fn averaging() {
        let one = DMatrix::from_element(1, 1, 0.5);
        let p = assemble_w(&[vec![0], vec![0]], &[one.clone(), one], 2);
        assert_eq!(p.values[(0, 0)], 0.5);
        let p = assemble_w(&[vec![0], vec![0]], &[DMatrix::from_element(1, 1, 0.50), DMatrix::from_element(1, 1, 0.52)], 2);
        assert!((p.values[(0, 0)] - 0.51).abs() < 1e-15);
        assert!(!p.known[(1, 1)]);
        assert!(!p.known[(0, 1)]);
    }

    #[test]
    fn path_completion_by_schur() {
        let graph = Graph::from_edges(3, [(0, 1), (1, 2)]);
        let block = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let p = assemble_w(&[vec![0, 1], vec![1, 2]], &[block.clone(), block], 3);
        let (_, peo) = chordal_extension(&graph);
        let w = psd_complete(&p, &graph, &peo);
        assert!((w[(0, 2)] - 0.25).abs() < 1e-12);
        assert!(w.symmetric_eigenvalues().min() >= -1e-12);
    }

    #[test]
    fn complete_pattern_unchanged() {
        let graph = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]);
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.5]);
        let p = assemble_w(&[vec![0, 1, 2]], &[m.clone()], 3);
        assert_eq!(psd_complete(&p, &graph, &[0, 1, 2]), m);
    }

    #[test]
    fn disconnected_blocks_fill_zero() {
        let graph = Graph::from_edges(4, [(0, 1), (2, 3)]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let p = assemble_w(&[vec![0, 1], vec![2, 3]], &[b.clone(), b], 4);
        let w = psd_complete(&p, &graph, &[0, 1, 2, 3]);
        for i in 0..2 {
            for j in 2..4 {
                assert_eq!(w[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn real_expansion_keeps_peo() {
        let graph = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]);
        let (h, peo) = chordal_extension(&graph);
        let (g2, peo2) = expand_real(&h, &peo);
        assert_eq!(g2.n(), 8);
        assert!(is_perfect_elimination_ordering(&g2, &peo2));
    }
}
