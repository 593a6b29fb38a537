//! Silhouette coefficient with Euclidean distances.

use crate::error::{Error, Result};
use crate::trajectory::{squared_distance, Embedding, Labeling};

/// Per-point silhouette values `(b - a) / max(a, b)`.
///
/// Members of singleton clusters score 0, as do points with `a = b = 0`.
pub fn silhouette_samples(e: &Embedding, l: &Labeling) -> Result<Vec<f64>> {
    let n = e.rows();
    if l.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: l.len(),
        });
    }
    let k = l.k();
    if k < 2 {
        return Err(Error::invalid(format!("silhouette needs at least 2 clusters, got {k}")));
    }
    let sizes = l.cluster_sizes();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(empty));
    }
    let labels = l.labels();
    let mut sums = vec![0.0; k];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += squared_distance(e.row(i), e.row(j)).sqrt();
            }
        }
        let own = labels[i];
        if sizes[own] == 1 {
            out.push(0.0);
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        out.push(if denom > 0.0 { (b - a) / denom } else { 0.0 });
    }
    Ok(out)
}

/// Mean silhouette over all points, in `[-1, 1]`.
pub fn silhouette_score(e: &Embedding, l: &Labeling) -> Result<f64> {
    let s = silhouette_samples(e, l)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}
