//! Undirected graph storage, the normalized propagation matrix
//! `P = D^-1/2 (A + I) D^-1/2`, and the row-selection kernels the samplers
//! are built from.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge #{index} ({u}, {v}) has an endpoint outside 0..{num_nodes}")]
    EdgeOutOfRange {
        index: usize,
        u: usize,
        v: usize,
        num_nodes: usize,
    },
    #[error("row selection index {index} (position {position}) outside 0..{num_nodes}")]
    RowOutOfRange {
        position: usize,
        index: usize,
        num_nodes: usize,
    },
}

/// CSR adjacency of a simple undirected graph: symmetric, deduplicated and
/// without stored self-loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseGraph {
    num_nodes: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparseGraph {
    /// Builds the graph from an unordered edge list. Direction, duplicates and
    /// self-loops in the input are normalized away.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for (index, &(u, v)) in edges.iter().enumerate() {
            if u >= num_nodes || v >= num_nodes {
                return Err(GraphError::EdgeOutOfRange { index, u, v, num_nodes });
            }
            if u != v {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
        let mut row_ptr = Vec::with_capacity(num_nodes + 1);
        let mut col_idx = Vec::with_capacity(2 * edges.len());
        row_ptr.push(0);
        for mut row in adjacency {
            row.sort_unstable();
            row.dedup();
            col_idx.extend(row);
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            num_nodes,
            row_ptr,
            col_idx,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// `||A||_0`: stored (directed) adjacency entries, twice the edge count.
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn num_edges(&self) -> usize {
        self.col_idx.len() / 2
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row_ptr[v + 1] - self.row_ptr[v]
    }

    /// Open neighborhood of `v`, sorted.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[v]..self.row_ptr[v + 1]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Union of closed neighborhoods `N(v) ∪ {v}` over `nodes`, sorted and
    /// deduplicated. This is exactly the column support of `Q (A + I)`.
    pub fn neighbor_union(&self, nodes: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = nodes
            .iter()
            .flat_map(|&v| std::iter::once(v).chain(self.neighbors(v).iter().copied()))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Ordered list of node indices picked out of a matrix. Duplicates are
/// allowed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RowSelection(Vec<usize>);

impl RowSelection {
    pub fn new(selected: Vec<usize>) -> Self {
        Self(selected)
    }

    pub fn all(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    pub fn validate(&self, num_nodes: usize) -> Result<(), GraphError> {
        match self.0.iter().position(|&i| i >= num_nodes) {
            Some(position) => Err(GraphError::RowOutOfRange {
                position,
                index: self.0[position],
                num_nodes,
            }),
            None => Ok(()),
        }
    }
}

impl From<Vec<usize>> for RowSelection {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// The normalized propagation matrix with its column norms cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Laplacian {
    matrix: CsrMatrix,
    col_sq_norms: Vec<f64>,
    frob_sq: f64,
}

impl Laplacian {
    /// `P = D^-1/2 (A + I) D^-1/2` where `D` holds the degrees of `A + I`.
    pub fn from_graph(g: &SparseGraph) -> Self {
        let n = g.num_nodes();
        let closed_degree: Vec<f64> = (0..n).map(|v| (g.degree(v) + 1) as f64).collect();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(g.nnz() + n);
        let mut values = Vec::with_capacity(g.nnz() + n);
        row_ptr.push(0);
        for i in 0..n {
            let neighbors = g.neighbors(i);
            let split = neighbors.partition_point(|&j| j < i);
            let closed = neighbors[..split]
                .iter()
                .chain(std::iter::once(&i))
                .chain(&neighbors[split..]);
            for &j in closed {
                col_idx.push(j);
                // Commutative product keeps P[i][j] and P[j][i] bitwise equal.
                values.push(1.0 / (closed_degree[i] * closed_degree[j]).sqrt());
            }
            row_ptr.push(col_idx.len());
        }
        let matrix = CsrMatrix::from_raw(n, n, row_ptr, col_idx, values);
        let col_sq_norms = matrix.column_sq_norms();
        let frob_sq = col_sq_norms.iter().sum();
        Self {
            matrix,
            col_sq_norms,
            frob_sq,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// `||P_{*,j}||_2^2` for every column.
    pub fn col_sq_norms(&self) -> &[f64] {
        &self.col_sq_norms
    }

    /// `||P||_F^2`.
    pub fn frob_sq(&self) -> f64 {
        self.frob_sq
    }

    /// `QP`: the rows of `P` named by `q`, in order.
    pub fn select_rows(&self, q: &RowSelection) -> Result<CsrMatrix, GraphError> {
        q.validate(self.num_nodes())?;
        Ok(self.matrix.select_rows(q.indices()))
    }
}

/// Free-function spelling of [`Laplacian::from_graph`].
pub fn normalized_laplacian(g: &SparseGraph) -> Laplacian {
    Laplacian::from_graph(g)
}
