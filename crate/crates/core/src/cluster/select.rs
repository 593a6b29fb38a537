//! Cluster-count selection by silhouette.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::gmm::{fit_gmm_with, predict_labels, GmmConfig};
use crate::cluster::kmeans::kmeans;
use crate::cluster::silhouette::silhouette_score;
use crate::cluster::ClusterMethod;
use crate::error::{Error, Result};
use crate::rng;
use crate::trajectory::{Embedding, Labeling};

/// Score given to a fit whose points all fall into a single cluster.
const COLLAPSED_SCORE: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub candidate_ks: Vec<usize>,
    pub silhouettes: Vec<f64>,
    pub best_k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweepEntry {
    pub k: usize,
    /// Compacted labels: empty clusters are dropped, so `labeling.k()` may be
    /// below `k`.
    pub labeling: Labeling,
    pub silhouette: f64,
}

/// Clusters `e` once per `k`.
pub fn sweep_k(
    e: &Embedding,
    ks: &[usize],
    method: ClusterMethod,
    seed: u64,
    gmm: &GmmConfig,
) -> Result<Vec<KSweepEntry>> {
    if ks.is_empty() {
        return Err(Error::invalid("no candidate cluster counts"));
    }
    if let Some(&bad) = ks.iter().find(|&&k| k < 2 || k > e.rows()) {
        return Err(Error::invalid(format!(
            "candidate k = {bad} outside 2..={}",
            e.rows()
        )));
    }
    ks.par_iter()
        .map(|&k| {
            let k_seed = rng::derive_seed(seed, &format!("{method}/k{k}"));
            let raw = match method {
                ClusterMethod::Gmm => predict_labels(&fit_gmm_with(e, k, k_seed, gmm)?, e)?,
                ClusterMethod::Kmeans => kmeans(e, k, k_seed)?,
            };
            let labeling = Labeling::from_raw(raw.labels());
            let silhouette = if labeling.k() < 2 {
                COLLAPSED_SCORE
            } else {
                silhouette_score(e, &labeling)?
            };
            Ok(KSweepEntry { k, labeling, silhouette })
        })
        .collect()
}

/// Index of the highest score; ties go to the earliest entry.
pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fits every `k` in `ks` and keeps the one with the highest silhouette,
/// ties toward smaller `k`.
pub fn select_k(
    e: &Embedding,
    ks: &[usize],
    method: ClusterMethod,
    seed: u64,
) -> Result<(ModelSelection, Labeling)> {
    let entries = sweep_k(e, ks, method, seed, &GmmConfig::default())?;
    Ok(selection_from_sweep(entries))
}

pub(crate) fn selection_from_sweep(mut entries: Vec<KSweepEntry>) -> (ModelSelection, Labeling) {
    entries.sort_by_key(|x| x.k);
    let silhouettes: Vec<f64> = entries.iter().map(|x| x.silhouette).collect();
    let best = argmax_first(&silhouettes);
    let selection = ModelSelection {
        candidate_ks: entries.iter().map(|x| x.k).collect(),
        silhouettes,
        best_k: entries[best].k,
    };
    (selection, entries.swap_remove(best).labeling)
}
