//! Vector-space clustering and model selection.

pub mod gmm;
pub mod kmeans;
pub mod select;
pub mod silhouette;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::trajectory::{squared_distance, Embedding};

pub use gmm::{fit_gmm, fit_gmm_with, predict_labels, GmmConfig, GmmModel};
pub use kmeans::{kmeans, kmeans_detailed, KMeansResult};
pub use select::{select_k, sweep_k, KSweepEntry, ModelSelection};
pub use silhouette::{silhouette_samples, silhouette_score};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMethod {
    #[default]
    Gmm,
    Kmeans,
}

impl std::str::FromStr for ClusterMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gmm" => Ok(Self::Gmm),
            "kmeans" | "k-means" => Ok(Self::Kmeans),
            other => Err(format!("unknown clustering method `{other}`")),
        }
    }
}

impl std::fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Gmm => "gmm",
            Self::Kmeans => "kmeans",
        })
    }
}

/// k-means++ seeding: indices of `k` points, each drawn with probability
/// proportional to its squared distance to the nearest already chosen one.
/// Once every remaining point coincides with a chosen one, the smallest
/// unchosen index is taken.
pub(crate) fn kmeans_plus_plus<R: Rng>(e: &Embedding, k: usize, rng: &mut R) -> Vec<usize> {
    let n = e.rows();
    let mut chosen = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    chosen.push(first);
    let mut nearest: Vec<f64> = (0..n).map(|i| squared_distance(e.row(i), e.row(first))).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
            pick.expect("positive total has a positive entry")
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k ≤ n")
        };
        chosen.push(next);
        for (i, w) in nearest.iter_mut().enumerate() {
            *w = w.min(squared_distance(e.row(i), e.row(next)));
        }
    }
    chosen
}
