use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::graph::SparseGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeStats {
    pub num_nodes: usize,
    pub num_edges: usize,
    /// `2m / n`.
    pub average_degree: f64,
    pub max_degree: usize,
    /// Nonzeros of the adjacency matrix, `2m`.
    pub adjacency_nnz: usize,
}

pub fn degree_stats(g: &SparseGraph) -> DegreeStats {
    let n = g.num_nodes();
    DegreeStats {
        num_nodes: n,
        num_edges: g.num_edges(),
        average_degree: if n == 0 { 0.0 } else { g.nnz() as f64 / n as f64 },
        max_degree: (0..n).map(|v| g.degree(v)).max().unwrap_or(0),
        adjacency_nnz: g.nnz(),
    }
}

/// Exact expected size of the closed neighborhood union of a uniformly
/// random batch of `b` distinct nodes: node `v` is missed only when the batch
/// avoids all of `N[v]`, which has probability `C(n - |N[v]|, b) / C(n, b)`.
pub fn expected_union_size(g: &SparseGraph, b: usize) -> f64 {
    let n = g.num_nodes();
    let b = b.min(n);
    (0..n)
        .map(|v| {
            let k = g.degree(v) + 1;
            let mut miss = 1.0;
            for i in 0..b {
                if n <= k + i {
                    miss = 0.0;
                    break;
                }
                miss *= (n - k - i) as f64 / (n - i) as f64;
            }
            1.0 - miss
        })
        .sum()
}

/// Monte-Carlo estimate of the mean union size for every batch size in
/// `sizes`, using nested prefixes of `samples` random permutations so the
/// estimates are non-decreasing in `b`.
pub fn union_size_estimate<R: Rng + ?Sized>(g: &SparseGraph, sizes: &[usize], samples: usize, rng: &mut R) -> Vec<f64> {
    let n = g.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    let mut totals = vec![0.0; sizes.len()];
    let mut sorted: Vec<(usize, usize)> = sizes.iter().copied().enumerate().collect();
    sorted.sort_unstable_by_key(|&(_, b)| b);
    let mut covered = vec![false; n];
    for _ in 0..samples {
        order.shuffle(rng);
        covered.iter_mut().for_each(|c| *c = false);
        let mut count = 0usize;
        let mut taken = 0usize;
        for &(slot, b) in &sorted {
            while taken < b.min(n) {
                let v = order[taken];
                for &u in g.neighbors(v).iter().chain(std::iter::once(&v)) {
                    if !std::mem::replace(&mut covered[u], true) {
                        count += 1;
                    }
                }
                taken += 1;
            }
            totals[slot] += count as f64;
        }
    }
    totals.iter().map(|t| t / samples.max(1) as f64).collect()
}
