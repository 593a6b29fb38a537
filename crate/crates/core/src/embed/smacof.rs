//! Non-metric MDS by SMACOF stress majorization.
//!
//! Each iteration alternates an isotonic (pool-adjacent-violators) fit of
//! disparities to the current distances, ordered by the input
//! dissimilarities, with a Guttman transform of the configuration. The
//! disparities are kept at a fixed norm, so the raw stress
//! `∑ (d̂ - d)^2` cannot increase between iterations.
//!
//! Only the rank order of the dissimilarities is ever read and the start
//! configuration is random, so for a fixed seed any strictly increasing
//! transform of the input yields the same run.

use rand::Rng;

use crate::embed::mds::MdsConfig;
use crate::error::{Error, Result};
use crate::rng;
use crate::trajectory::{Embedding, EmbeddingKind, SymMatrix};

#[derive(Debug, Clone)]
pub struct SmacofResult {
    pub embedding: Embedding,
    /// Raw stress after each disparity update.
    pub stress_trace: Vec<f64>,
    /// `∑ (d̂ - d)^2 / ∑ d^2` at the returned configuration.
    pub normalized_stress: f64,
    pub iterations: usize,
}

/// Weighted least-squares non-decreasing fit (pool adjacent violators).
pub fn isotonic_regression(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // (weighted mean, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = (v, w, 1usize);
        while let Some(&(pv, pw, pc)) = blocks.last() {
            if pv <= cur.0 {
                break;
            }
            blocks.pop();
            let tw = pw + cur.1;
            let mean = if tw > 0.0 { (pv * pw + cur.0 * cur.1) / tw } else { (pv + cur.0) / 2.0 };
            cur = (mean, tw, pc + cur.2);
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(values.len());
    for (mean, _, count) in blocks {
        out.extend(std::iter::repeat_n(mean, count));
    }
    out
}

struct OrderedPairs {
    /// Pairs `(i, j)`, `i < j`, sorted by ascending dissimilarity.
    pairs: Vec<(u32, u32)>,
    /// Start offsets of runs of tied dissimilarities, plus the end.
    tie_starts: Vec<usize>,
}

fn order_pairs(c: &SymMatrix) -> OrderedPairs {
    let k = c.order();
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            pairs.push((i as u32, j as u32));
        }
    }
    pairs.sort_by(|a, b| {
        c.get(a.0 as usize, a.1 as usize)
            .total_cmp(&c.get(b.0 as usize, b.1 as usize))
            .then(a.cmp(b))
    });
    let mut tie_starts = vec![0];
    for p in 1..pairs.len() {
        let prev = c.get(pairs[p - 1].0 as usize, pairs[p - 1].1 as usize);
        let cur = c.get(pairs[p].0 as usize, pairs[p].1 as usize);
        if cur != prev {
            tie_starts.push(p);
        }
    }
    tie_starts.push(pairs.len());
    OrderedPairs { pairs, tie_starts }
}

/// Isotonic fit with tied dissimilarities constrained to a common value.
fn tied_isotonic(d: &[f64], tie_starts: &[usize], out: &mut Vec<f64>) {
    let groups = tie_starts.len() - 1;
    let mut means = Vec::with_capacity(groups);
    let mut weights = Vec::with_capacity(groups);
    for g in 0..groups {
        let (s, e) = (tie_starts[g], tie_starts[g + 1]);
        means.push(d[s..e].iter().sum::<f64>() / (e - s) as f64);
        weights.push((e - s) as f64);
    }
    let fitted = isotonic_regression(&means, &weights);
    out.clear();
    for g in 0..groups {
        let n = tie_starts[g + 1] - tie_starts[g];
        out.extend(std::iter::repeat_n(fitted[g], n));
    }
}

/// Start configuration: uniform in the unit cube, from the config seed.
fn random_start(k: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "smacof/init");
    (0..k * dim).map(|_| r.random::<f64>()).collect()
}

fn distances(x: &[f64], dim: usize, pairs: &[(u32, u32)], out: &mut Vec<f64>) {
    out.clear();
    out.extend(pairs.iter().map(|&(i, j)| {
        let (a, b) = (i as usize * dim, j as usize * dim);
        (0..dim)
            .map(|t| (x[a + t] - x[b + t]) * (x[a + t] - x[b + t]))
            .sum::<f64>()
            .sqrt()
    }));
}

/// Non-metric MDS of `c` into `cfg.target_dim` dimensions.
pub fn nonmetric_mds(c: &SymMatrix, cfg: &MdsConfig) -> Result<SmacofResult> {
    let k = c.order();
    if k < 3 {
        return Err(Error::invalid(format!("non-metric MDS needs at least 3 points, got {k}")));
    }
    let dim = cfg
        .target_dim
        .ok_or_else(|| Error::invalid("non-metric MDS needs an explicit target dimension"))?;
    if dim == 0 || dim > k {
        return Err(Error::invalid(format!("target dimension {dim} not in 1..={k}")));
    }
    let ordered = order_pairs(c);
    if ordered.tie_starts.len() <= 2 {
        return Err(Error::invalid("zero-variance dissimilarities"));
    }
    let n_pairs = ordered.pairs.len();
    let target_norm = (n_pairs as f64).sqrt();

    let mut x = random_start(k, dim, cfg.seed);
    let mut d = Vec::with_capacity(n_pairs);
    let mut dhat = Vec::with_capacity(n_pairs);
    let mut next = vec![0.0; k * dim];
    let mut stress_trace = Vec::new();
    let mut normalized_stress = 0.0;
    let mut iterations = 0;

    for iter in 0..=cfg.smacof_max_iter {
        distances(&x, dim, &ordered.pairs, &mut d);
        tied_isotonic(&d, &ordered.tie_starts, &mut dhat);
        let norm = dhat.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let s = target_norm / norm;
            dhat.iter_mut().for_each(|v| *v *= s);
        }
        let stress: f64 = dhat.iter().zip(&d).map(|(a, b)| (a - b) * (a - b)).sum();
        let dist_sq: f64 = d.iter().map(|v| v * v).sum();
        normalized_stress = if dist_sq > 0.0 { stress / dist_sq } else { 0.0 };
        if stress.is_nan() {
            return Err(Error::NonFinite("SMACOF stress".into()));
        }
        let converged = stress_trace
            .last()
            .is_some_and(|&prev: &f64| prev <= 0.0 || (prev - stress) / prev < cfg.smacof_eps);
        stress_trace.push(stress);
        iterations = iter;
        if converged || iter == cfg.smacof_max_iter || stress == 0.0 {
            break;
        }
        // Guttman transform: x_i ← (1/K) ∑_j (d̂_ij / d_ij)(x_i − x_j).
        next.iter_mut().for_each(|v| *v = 0.0);
        for (p, &(i, j)) in ordered.pairs.iter().enumerate() {
            if d[p] <= 0.0 {
                continue;
            }
            let r = dhat[p] / d[p];
            let (a, b) = (i as usize * dim, j as usize * dim);
            for t in 0..dim {
                let diff = r * (x[a + t] - x[b + t]);
                next[a + t] += diff;
                next[b + t] -= diff;
            }
        }
        let inv = 1.0 / k as f64;
        for (xi, ni) in x.iter_mut().zip(&next) {
            *xi = ni * inv;
        }
    }
    Ok(SmacofResult {
        embedding: Embedding::new(k, dim, x, EmbeddingKind::NonmetricMds)?,
        stress_trace,
        normalized_stress,
        iterations,
    })
}
