//! Robust principal component analysis for heavy-tailed elliptical data.
//!
//! The main estimator is the spatial-sign covariance matrix (SSCM) about the
//! spatial median, whose eigenvectors coincide with those of the underlying
//! scatter for any elliptical law. A sparse leading eigenvector is obtained
//! with the truncated power method, optionally started from a Fantope
//! relaxation. Multivariate Kendall's tau and the Pearson covariance are
//! provided as competing scatter estimators, together with a synthetic-data
//! sampler, a split-sample tuning rule for the sparsity level and the metrics
//! used to compare them.

pub mod data;
pub mod error;
pub mod fantope;
pub mod location;
pub mod metrics;
pub mod numerics;
pub mod rng;
pub mod sampler;
pub mod scatter;
pub mod sparse_pca;
pub mod tuning;

pub use data::DataMatrix;
pub use error::{Error, LastIterate, Result};
pub use fantope::{fantope_initializer, fantope_solve, FantopeConfig, FantopeSolution};
pub use location::{spatial_median, CenterEstimate, CenterMethod};
pub use metrics::{sin_angle, subspace_distance, MetricRecord, MetricTags};
pub use numerics::{sym_eigen, EigenPair, SymMatrix};
pub use sampler::{sample, EllipticalModel, Family, ScatterSpec, SpikedCovarianceSpec};
pub use scatter::{kendall_tau, pearson, sscm, ScatterEstimate, ScatterKind};
pub use sparse_pca::{truncated_power, Init, SparsePCConfig, SparsePCResult, SubspaceResult};
pub use tuning::{select_k, TuneConfig, TuneResult};
