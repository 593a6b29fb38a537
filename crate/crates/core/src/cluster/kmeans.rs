//! Lloyd's k-means with k-means++ seeding.

use rand::SeedableRng;

use crate::cluster::kmeans_plus_plus;
use crate::error::{Error, Result};
use crate::rng;
use crate::trajectory::{squared_distance, Embedding, Labeling};

const MAX_ITER: usize = 100;
const RESTARTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labeling: Labeling,
    /// `k` rows of length `dim`.
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Within-cluster sum of squares after every assignment step.
    pub inertia_trace: Vec<f64>,
}

pub fn kmeans(e: &Embedding, k: usize, seed: u64) -> Result<Labeling> {
    Ok(kmeans_detailed(e, k, seed)?.labeling)
}

/// Best of 5 restarts by inertia; earlier restarts win ties.
pub fn kmeans_detailed(e: &Embedding, k: usize, seed: u64) -> Result<KMeansResult> {
    let n = e.rows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cannot form {k} clusters from {n} points")));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..RESTARTS {
        let run = lloyd(e, k, rng::derive_indexed(seed, r as u64));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.iter().enumerate() {
        let d = squared_distance(x, mu);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(e: &Embedding, k: usize, seed: u64) -> KMeansResult {
    let (n, d) = (e.rows(), e.dim());
    let mut stream = rng::StreamRng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = kmeans_plus_plus(e, k, &mut stream)
        .into_iter()
        .map(|i| e.row(i).to_vec())
        .collect();
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    for _ in 0..MAX_ITER {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, label) in labels.iter_mut().enumerate() {
            let (c, dist) = nearest(e.row(i), &centroids);
            inertia += dist;
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(e.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    KMeansResult {
        labeling: Labeling::new(labels, k).expect("labels below k"),
        centroids,
        inertia: *trace.last().expect("at least one iteration"),
        inertia_trace: trace,
    }
}
