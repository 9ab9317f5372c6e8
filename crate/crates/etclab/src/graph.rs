//! Undirected communication graphs and switching-topology families.
//!
//! A consensus run never requires any single graph in the family to be
//! connected. What the guarantees need is connectivity of the union and a
//! positive algebraic connectivity of the family's summed Laplacian, so
//! those are the quantities [`TopologySet`] computes and caches up front.

use crate::matrix::{Matrix, MatrixError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("node {node} out of range for a graph on {n} nodes")]
    InvalidNode { node: usize, n: usize },
    #[error("self-loop on node {node} is not allowed")]
    SelfLoop { node: usize },
    #[error("topology family must contain at least one graph")]
    EmptyFamily,
    #[error("graph has {got} nodes, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("union of the topology family is disconnected; components: {components:?}")]
    UnionDisconnected { components: Vec<Vec<usize>> },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Simple undirected graph with unit edge weights, stored as a dense
/// symmetric adjacency table.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    adj: Vec<u8>,
}

impl Graph {
    pub fn new(n: usize) -> Graph {
        assert!(n > 0, "graph needs at least one node");
        Graph {
            n,
            adj: vec![0; n * n],
        }
    }

    /// Builds a graph on `n` nodes from 0-based edge pairs. Duplicate
    /// edges are idempotent; self-loops and out-of-range nodes are
    /// rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph, GraphError> {
        let mut g = Graph::new(n);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<(), GraphError> {
        if i >= self.n {
            return Err(GraphError::InvalidNode { node: i, n: self.n });
        }
        if j >= self.n {
            return Err(GraphError::InvalidNode { node: j, n: self.n });
        }
        if i == j {
            return Err(GraphError::SelfLoop { node: i });
        }
        self.adj[i * self.n + j] = 1;
        self.adj[j * self.n + i] = 1;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.adj[i * self.n + j] != 0
    }

    /// Edge list with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.adj[i * self.n + j] != 0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.has_edge(i, j)).count()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_edge(i, j))
    }

    pub fn adjacency(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| self.adj[i * self.n + j] as f64)
    }

    /// Graph Laplacian `L = D - A`. Entries are small integers, so the
    /// result is exact in floating point.
    pub fn laplacian(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| {
            if i == j {
                self.degree(i) as f64
            } else {
                -(self.adj[i * self.n + j] as f64)
            }
        })
    }

    /// Edge-union of a family of graphs on the same node set.
    pub fn union(graphs: &[Graph]) -> Result<Graph, GraphError> {
        let first = graphs.first().ok_or(GraphError::EmptyFamily)?;
        let mut out = Graph::new(first.n);
        for g in graphs {
            if g.n != first.n {
                return Err(GraphError::SizeMismatch {
                    expected: first.n,
                    got: g.n,
                });
            }
            for (a, b) in g.adj.iter().zip(out.adj.iter_mut()) {
                *b |= *a;
            }
        }
        Ok(out)
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() == 1
    }

    /// Connected components by breadth-first search, each sorted, ordered
    /// by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut components = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut queue = std::collections::VecDeque::from([start]);
            seen[start] = true;
            let mut comp = vec![start];
            while let Some(u) = queue.pop_front() {
                for v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }
}

/// Second-smallest eigenvalue of a graph Laplacian.
pub fn algebraic_connectivity(laplacian: &Matrix) -> Result<f64, MatrixError> {
    let eigs = laplacian.sym_eigenvalues()?;
    Ok(eigs.get(1).copied().unwrap_or(0.0))
}

/// A finite family of candidate communication graphs together with the
/// spectral quantities the feasibility conditions depend on.
///
/// `summed_laplacian` is the sum of the per-mode Laplacians, not the
/// Laplacian of the union; the two coincide only when the family is
/// edge-disjoint. Connectivity of the union is required at construction,
/// individual family members may be disconnected.
#[derive(Debug, Clone)]
pub struct TopologySet {
    graphs: Vec<Graph>,
    union: Graph,
    summed_laplacian: Matrix,
    lambda2: f64,
    lambda_max: f64,
}

impl TopologySet {
    pub fn new(graphs: Vec<Graph>) -> Result<TopologySet, GraphError> {
        let union = Graph::union(&graphs)?;
        if !union.is_connected() {
            return Err(GraphError::UnionDisconnected {
                components: union.connected_components(),
            });
        }
        let n = union.n();
        let mut summed = Matrix::zeros(n, n);
        for g in &graphs {
            summed = &summed + &g.laplacian();
        }
        let eigs = summed.sym_eigenvalues()?;
        let lambda2 = eigs.get(1).copied().unwrap_or(0.0);
        let lambda_max = *eigs.last().expect("laplacian has at least one eigenvalue");
        Ok(TopologySet {
            graphs,
            union,
            summed_laplacian: summed,
            lambda2,
            lambda_max,
        })
    }

    pub fn modes(&self) -> usize {
        self.graphs.len()
    }

    pub fn n(&self) -> usize {
        self.union.n()
    }

    pub fn graph(&self, mode: usize) -> &Graph {
        &self.graphs[mode]
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn union(&self) -> &Graph {
        &self.union
    }

    pub fn summed_laplacian(&self) -> &Matrix {
        &self.summed_laplacian
    }

    /// Algebraic connectivity of the summed Laplacian.
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// Largest eigenvalue of the summed Laplacian.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn demo_family() -> Vec<Graph> {
        let g1 = Graph::from_edges(
            10,
            &[(0, 1), (1, 2), (3, 4), (5, 6), (7, 8), (8, 9)],
        )
        .unwrap();
        let g2 = Graph::from_edges(10, &[(2, 3), (4, 5), (6, 7), (9, 0)]).unwrap();
        vec![g1, g2]
    }

    #[test]
    fn path_laplacian_entries() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let expected = Matrix::from_rows(vec![
            vec![1.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 1.0],
        ])
        .unwrap();
        assert_eq!(g.laplacian(), expected);
        assert!((algebraic_connectivity(&g.laplacian()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn edge_bookkeeping() {
        let g = Graph::from_edges(4, &[(2, 0), (0, 1), (0, 1)]).unwrap();
        assert_eq!(g.edges(), vec![(0, 1), (0, 2)]);
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.neighbors(0).collect::<Vec<_>>(), vec![1, 2]);
        assert!(g.has_edge(1, 0));
        assert!(!g.has_edge(1, 2));
    }

    #[test]
    fn rejects_bad_edges() {
        assert_eq!(
            Graph::from_edges(3, &[(0, 3)]).unwrap_err(),
            GraphError::InvalidNode { node: 3, n: 3 }
        );
        assert_eq!(
            Graph::from_edges(3, &[(1, 1)]).unwrap_err(),
            GraphError::SelfLoop { node: 1 }
        );
    }

    #[test]
    fn demo_family_union_is_ring() {
        let family = demo_family();
        assert!(!family[0].is_connected());
        assert!(!family[1].is_connected());
        let union = Graph::union(&family).unwrap();
        assert!(union.is_connected());
        assert_eq!(union.edges().len(), 10);
        for i in 0..10 {
            assert_eq!(union.degree(i), 2);
        }
    }

    #[test]
    fn demo_family_spectral_constants() {
        let topo = TopologySet::new(demo_family()).unwrap();
        assert!((topo.lambda2() - 0.3819660112501051).abs() < 1e-12);
        assert!((topo.lambda_max() - 4.0).abs() < 1e-12);
        let union_lap = topo.union().laplacian();
        assert_eq!(topo.summed_laplacian(), &union_lap);
    }

    #[test]
    fn summed_laplacian_double_counts_shared_edges() {
        let g1 = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let g2 = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let topo = TopologySet::new(vec![g1, g2]).unwrap();
        assert_eq!(topo.summed_laplacian()[(0, 1)], -2.0);
        assert_eq!(topo.summed_laplacian()[(1, 2)], -1.0);
    }

    #[test]
    fn disconnected_union_reports_partition() {
        let g1 = Graph::from_edges(4, &[(0, 1)]).unwrap();
        let g2 = Graph::from_edges(4, &[(2, 3)]).unwrap();
        let err = TopologySet::new(vec![g1, g2]).unwrap_err();
        assert_eq!(
            err,
            GraphError::UnionDisconnected {
                components: vec![vec![0, 1], vec![2, 3]],
            }
        );
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let g1 = Graph::new(3);
        let g2 = Graph::new(4);
        assert_eq!(
            Graph::union(&[g1, g2]).unwrap_err(),
            GraphError::SizeMismatch {
                expected: 3,
                got: 4
            }
        );
    }

    #[test]
    fn single_node_graph_is_connected() {
        let topo = TopologySet::new(vec![Graph::new(1)]).unwrap();
        assert!(topo.union().is_connected());
        assert_eq!(topo.lambda2(), 0.0);
    }

    proptest! {
        #[test]
        fn bfs_and_spectrum_agree_on_connectivity(
            n in 2usize..8,
            edge_bits in proptest::collection::vec(any::<bool>(), 28),
            split in proptest::collection::vec(0usize..3, 28),
        ) {
            let mut family = vec![Graph::new(n), Graph::new(n), Graph::new(n)];
            let mut idx = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if edge_bits[idx] {
                        family[split[idx]].add_edge(i, j).unwrap();
                    }
                    idx += 1;
                }
            }
            let union = Graph::union(&family).unwrap();
            let mut summed = Matrix::zeros(n, n);
            for g in &family {
                summed = &summed + &g.laplacian();
            }
            let lambda2 = algebraic_connectivity(&summed).unwrap();
            if union.is_connected() {
                prop_assert!(lambda2 > 1e-6);
            } else {
                prop_assert!(lambda2.abs() < 1e-9);
            }
        }
    }
}
