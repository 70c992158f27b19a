//! Random forests for nonparametric conditional density estimation.
//!
//! Trees are grown to minimize an L2 conditional-density loss, scored cheaply
//! through orthogonal cosine-series estimates of the response density in each
//! child. Predictions are weighted kernel density estimates, with the weights
//! given by leaf co-membership across the ensemble. Univariate and joint
//! (two or three dimensional) responses are supported.
//!
//! The numerics are generic over the floating-point type (see [`Scalar`]);
//! the `*64` / `*32` aliases below pin the common choices.

pub mod basis;
pub mod density;
pub mod error;
pub mod forest;
pub mod loss;
mod model;
pub mod scalar;
pub mod simgen;
pub mod tree;

pub use basis::{cosine_basis, rescale_response, tensor_basis, BasisSpec};
pub use density::{
    adaptive_bandwidth, grid_integral, weighted_kde, Bandwidth, BandwidthSpec, DensityEstimate,
    Lattice, WeightVector,
};
pub use error::{Error, Result};
pub use forest::{Forest, ForestParams, TrainingSet};
pub use loss::{cde_loss, interpolate_density, ConditionalDensity, ForestDensity, LossReport};
pub use model::FORMAT_VERSION;
pub use scalar::Scalar;
pub use tree::{best_split, build_tree, prefix_split_scores, split_score_cde, split_score_mse, Criterion, LeafId, Node, SplitRule, Tree, TreeParams};

pub type Forest64 = Forest<f64>;
pub type Forest32 = Forest<f32>;
pub type TrainingSet64 = TrainingSet<f64>;
pub type DensityEstimate64 = DensityEstimate<f64>;
pub type WeightVector64 = WeightVector<f64>;
pub type LossReport64 = LossReport<f64>;
