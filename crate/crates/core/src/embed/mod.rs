//! Vector embeddings of dissimilarity matrices.

pub mod mds;
pub mod smacof;
pub mod tsne;

pub use mds::{classical_mds, elbow_dimension, explained_variance_dimension, ClassicalMds, MdsConfig};
pub use smacof::{nonmetric_mds, SmacofResult};
pub use tsne::{conditional_affinities, symmetrize_affinities, tsne_embed, TsneConfig, TsneResult};
