//! Layer-dependent importance sampling for training deep GCNs, with
//! layer-wise, node-wise and full-batch baselines.

pub mod data;
pub mod graph;
pub mod model;
pub mod sampling;
pub mod sparse;
pub mod variance;

pub use data::{DataError, Dataset, Splits, SyntheticSpec};
pub use graph::{normalized_laplacian, GraphError, Laplacian, RowSelection, SparseGraph};
pub use model::{AdamState, ForwardTrace, GcnModel, ModelError};
pub use sampling::{BatchPlan, LayerPlan, SamplerConfig, SamplerError, SamplerKind, SketchDiag};
pub use sparse::CsrMatrix;
pub use variance::{ExactProduct, VarianceError, VarianceReport};
