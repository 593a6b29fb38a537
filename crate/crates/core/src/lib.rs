//! Clustering of variable-length 2-D motion trajectories.
//!
//! The main pipeline (DTMM) chains five stages:
//!
//! 1. pairwise dynamic time warping costs ([`alignment`]),
//! 2. a t-SNE embedding of those costs ([`embed::tsne`]),
//! 3. Minimax (path-based) distances over the embedded points ([`minimax`]),
//! 4. a classical MDS embedding of the Minimax matrix ([`embed::mds`]),
//! 5. mixture-model clustering with silhouette-based choice of `k` ([`cluster`]).
//!
//! [`pipeline`] wires the stages into DTMM and four ablation baselines,
//! [`metrics`] scores labelings against ground truth and [`scenario`]
//! generates synthetic cut-in / drive-by trajectories to run everything on.

pub mod alignment;
pub mod cluster;
pub mod config;
pub mod embed;
pub mod error;
pub mod io;
pub mod metrics;
pub mod minimax;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod trajectory;

pub use error::{Error, Result};
pub use trajectory::{Embedding, EmbeddingKind, Labeling, Point2, SymMatrix, Trajectory, TrajectorySet};
