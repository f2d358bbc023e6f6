//! Shared fixtures for the criterion benches.

use ladies_core::data::Generator;
use ladies_core::{GcnModel, Laplacian, RowSelection, SparseGraph};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A seeded sparse graph with random features and a matching model.
pub struct Fixture {
    pub graph: SparseGraph,
    pub laplacian: Laplacian,
    pub features: Array2<f64>,
    pub model: GcnModel,
}

impl Fixture {
    /// Four-block SBM on `n` nodes with mean degree near `degree`, `dim`
    /// input features and `layers` hidden layers of width `hidden`.
    pub fn sbm(n: usize, degree: f64, dim: usize, hidden: usize, layers: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let block = n / 4;
        let block_sizes = vec![block, block, block, n - 3 * block];
        let p_in = 0.8 * degree / block as f64;
        let p_out = 0.2 * degree / (n - block) as f64;
        let graph = Generator::Sbm {
            block_sizes,
            p_in: p_in.min(1.0),
            p_out: p_out.min(1.0),
        }
        .build(&mut rng)
        .expect("valid generator");
        let laplacian = Laplacian::from_graph(&graph);
        let features = Array2::from_shape_simple_fn((n, dim), || rng.random_range(0.0..1.0));
        let mut dims = vec![dim];
        dims.extend(std::iter::repeat_n(hidden, layers - 1));
        dims.push(4);
        let model = GcnModel::init(&dims, &mut rng).expect("valid dims");
        Self {
            graph,
            laplacian,
            features,
            model,
        }
    }

    /// `size` distinct nodes, sorted.
    pub fn batch(&self, size: usize, seed: u64) -> RowSelection {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = rand::seq::index::sample(&mut rng, self.graph.num_nodes(), size).into_vec();
        v.sort_unstable();
        RowSelection::new(v)
    }

    pub fn labels(&self, count: usize) -> Vec<usize> {
        (0..count).map(|i| i % 4).collect()
    }
}
