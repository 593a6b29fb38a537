//! Exact t-SNE on a precomputed dissimilarity matrix.
//!
//! Dissimilarities enter the Gaussian kernel squared, `exp(-beta_i * c_ij^2)`,
//! with one `beta_i` per row found by bisection on the row perplexity.

use log::warn;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::trajectory::{Embedding, EmbeddingKind, SymMatrix};

/// Lower bound applied to joint affinities before taking logs.
pub const AFFINITY_FLOOR: f64 = 1e-12;
const PERPLEXITY_TOLERANCE: f64 = 1e-5;
const BISECTION_STEPS: usize = 50;
const MAX_BRACKET_STEPS: usize = 200;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub output_dim: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            output_dim: 2,
            iterations: 1000,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
        }
    }
}

impl TsneConfig {
    /// Perplexity actually used for `k` points: the configured value clamped
    /// to `(k - 1) / 3`.
    pub fn effective_perplexity(&self, k: usize) -> f64 {
        let cap = (k as f64 - 1.0) / 3.0;
        self.perplexity.min(cap)
    }
}

/// Row-stochastic conditional neighbor distributions `p_{j|i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalAffinities {
    pub order: usize,
    /// Row-major `order × order`, zero diagonal, rows summing to one.
    pub rows: Vec<f64>,
    /// Perplexity reached by each row.
    pub achieved_perplexity: Vec<f64>,
    pub betas: Vec<f64>,
}

/// Probabilities and perplexity of one row for precision `beta`.
///
/// `sq` holds squared dissimilarities shifted so that the smallest entry is 0.
fn row_distribution(sq: &[f64], beta: f64, out: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for (o, &d) in out.iter_mut().zip(sq) {
        *o = (-beta * d).exp();
        sum += *o;
    }
    let mut weighted = 0.0;
    for (o, &d) in out.iter_mut().zip(sq) {
        *o /= sum;
        weighted += *o * d;
    }
    // Natural-log entropy; exp(H) equals 2^(H in bits).
    let entropy = sum.ln() + beta * weighted;
    entropy.exp()
}

/// Per-row Gaussian neighbor distributions calibrated to `perplexity`.
pub fn conditional_affinities(c: &SymMatrix, perplexity: f64) -> Result<ConditionalAffinities> {
    let k = c.order();
    if k < 3 {
        return Err(Error::invalid(format!("t-SNE needs at least 3 points, got {k}")));
    }
    if !(perplexity > 0.0 && perplexity < k as f64) {
        return Err(Error::invalid(format!(
            "perplexity {perplexity} must lie in (0, {k})"
        )));
    }
    let mut rows = vec![0.0; k * k];
    let mut achieved = vec![0.0; k];
    let mut betas = vec![0.0; k];
    let mut sq = Vec::with_capacity(k - 1);
    let mut probs = vec![0.0; k - 1];
    let target_log = perplexity.ln();

    for i in 0..k {
        sq.clear();
        sq.extend((0..k).filter(|&j| j != i).map(|j| c.get(i, j) * c.get(i, j)));
        let min = sq.iter().copied().fold(f64::INFINITY, f64::min);
        let max = sq.iter().copied().fold(0.0, f64::max);
        let row = &mut rows[i * k..(i + 1) * k];
        if max == 0.0 {
            warn!("row {i}: all dissimilarities are zero, using a uniform neighbor distribution");
            let u = 1.0 / (k as f64 - 1.0);
            for (j, r) in row.iter_mut().enumerate() {
                *r = if j == i { 0.0 } else { u };
            }
            achieved[i] = k as f64 - 1.0;
            continue;
        }
        for d in sq.iter_mut() {
            *d -= min;
        }
        let mean = sq.iter().sum::<f64>() / sq.len() as f64;
        let mut beta = if mean > 0.0 { 1.0 / mean } else { 1.0 };

        // Perplexity decreases monotonically in beta. Bracket, then bisect.
        let mut perp = row_distribution(&sq, beta, &mut probs);
        let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
        for _ in 0..MAX_BRACKET_STEPS {
            if (perp - perplexity).abs() <= PERPLEXITY_TOLERANCE {
                break;
            }
            if perp > perplexity {
                lo = beta;
                if hi.is_finite() {
                    break;
                }
                beta *= 2.0;
            } else {
                hi = beta;
                if lo > 0.0 {
                    break;
                }
                beta /= 2.0;
            }
            perp = row_distribution(&sq, beta, &mut probs);
        }
        if (perp - perplexity).abs() > PERPLEXITY_TOLERANCE && lo > 0.0 && hi.is_finite() {
            for _ in 0..BISECTION_STEPS {
                beta = (lo * hi).sqrt();
                perp = row_distribution(&sq, beta, &mut probs);
                if (perp - perplexity).abs() <= PERPLEXITY_TOLERANCE {
                    break;
                }
                if perp > perplexity {
                    lo = beta;
                } else {
                    hi = beta;
                }
            }
        }
        if (perp.ln() - target_log).abs() > 1e-3 {
            warn!("row {i}: perplexity {perp:.6} differs from target {perplexity}");
        }
        let mut src = probs.iter();
        for (j, r) in row.iter_mut().enumerate() {
            *r = if j == i { 0.0 } else { *src.next().expect("k - 1 entries") };
        }
        achieved[i] = perp;
        betas[i] = beta;
    }
    Ok(ConditionalAffinities {
        order: k,
        rows,
        achieved_perplexity: achieved,
        betas,
    })
}

/// Joint affinities `p_ij = (p_{j|i} + p_{i|j}) / 2K`, floored at
/// [`AFFINITY_FLOOR`] and renormalized to sum to one off the diagonal.
pub fn symmetrize_affinities(p_cond: &[f64], order: usize) -> Vec<f64> {
    let k = order;
    let mut p = vec![0.0; k * k];
    let denom = 2.0 * k as f64;
    let mut total = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            let v = ((p_cond[i * k + j] + p_cond[j * k + i]) / denom).max(AFFINITY_FLOOR);
            p[i * k + j] = v;
            p[j * k + i] = v;
            total += 2.0 * v;
        }
    }
    for v in p.iter_mut() {
        *v /= total;
    }
    p
}

/// KL divergence, its gradient and the normalizer of Q at one configuration.
#[derive(Debug, Clone)]
pub struct KlEvaluation {
    pub kl: f64,
    pub gradient: Vec<f64>,
    /// `∑_{i≠j} q_ij` after normalization.
    pub q_sum: f64,
}

/// Evaluates `KL(P ‖ Q)` with Student-t `Q` for points `y` (row-major,
/// `dim` columns).
pub fn kl_gradient(p: &[f64], y: &[f64], order: usize, dim: usize) -> KlEvaluation {
    let mut num = vec![0.0; order * order];
    let z = student_kernel(y, order, dim, &mut num);
    let mut gradient = vec![0.0; order * dim];
    accumulate_gradient(p, &num, z, 1.0, y, order, dim, &mut gradient);
    let mut kl = 0.0;
    let mut q_sum = 0.0;
    for i in 0..order {
        for j in 0..order {
            if i == j {
                continue;
            }
            let q = num[i * order + j] / z;
            q_sum += q;
            let pij = p[i * order + j];
            if pij > 0.0 {
                kl += pij * (pij / q).ln();
            }
        }
    }
    KlEvaluation { kl, gradient, q_sum }
}

/// Fills `num` with `(1 + |y_i - y_j|^2)^-1` (zero diagonal) and returns
/// their sum.
fn student_kernel(y: &[f64], order: usize, dim: usize, num: &mut [f64]) -> f64 {
    let mut z = 0.0;
    for i in 0..order {
        let yi = &y[i * dim..(i + 1) * dim];
        num[i * order + i] = 0.0;
        for j in (i + 1)..order {
            let yj = &y[j * dim..(j + 1) * dim];
            let d2: f64 = yi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum();
            let v = 1.0 / (1.0 + d2);
            num[i * order + j] = v;
            num[j * order + i] = v;
            z += 2.0 * v;
        }
    }
    z
}

#[allow(clippy::too_many_arguments)]
fn accumulate_gradient(
    p: &[f64],
    num: &[f64],
    z: f64,
    exaggeration: f64,
    y: &[f64],
    order: usize,
    dim: usize,
    grad: &mut [f64],
) {
    grad.iter_mut().for_each(|g| *g = 0.0);
    for i in 0..order {
        let yi = &y[i * dim..(i + 1) * dim];
        let gi = &mut grad[i * dim..(i + 1) * dim];
        let prow = &p[i * order..(i + 1) * order];
        let nrow = &num[i * order..(i + 1) * order];
        for j in 0..order {
            if j == i {
                continue;
            }
            let w = (exaggeration * prow[j] - nrow[j] / z) * nrow[j];
            let yj = &y[j * dim..(j + 1) * dim];
            for d in 0..dim {
                gi[d] += 4.0 * w * (yi[d] - yj[d]);
            }
        }
    }
}

/// Output of [`tsne_embed`].
#[derive(Debug, Clone)]
pub struct TsneResult {
    pub embedding: Embedding,
    /// `(iteration, KL)` samples against the unexaggerated `P`; the first
    /// entry is iteration 1 and the last the final iterate.
    pub kl_trace: Vec<(usize, f64)>,
    pub perplexity: f64,
}

impl TsneResult {
    pub fn initial_kl(&self) -> f64 {
        self.kl_trace.first().map_or(f64::NAN, |s| s.1)
    }

    pub fn final_kl(&self) -> f64 {
        self.kl_trace.last().map_or(f64::NAN, |s| s.1)
    }
}

/// Embeds the dissimilarities `c` into `cfg.output_dim` dimensions.
pub fn tsne_embed(c: &SymMatrix, cfg: &TsneConfig) -> Result<TsneResult> {
    let k = c.order();
    if k < 3 {
        return Err(Error::invalid(format!("t-SNE needs at least 3 points, got {k}")));
    }
    if cfg.iterations == 0 || cfg.output_dim == 0 {
        return Err(Error::invalid("t-SNE needs iterations ≥ 1 and output_dim ≥ 1"));
    }
    let perplexity = cfg.effective_perplexity(k);
    let cond = conditional_affinities(c, perplexity)?;
    let p = symmetrize_affinities(&cond.rows, k);
    let dim = cfg.output_dim;

    let mut rng = rng::stream(cfg.seed, "tsne/init");
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<f64> = (0..k * dim).map(|_| normal.sample(&mut rng)).collect();
    let mut update = vec![0.0; k * dim];
    let mut gains = vec![1.0_f64; k * dim];
    let mut grad = vec![0.0; k * dim];
    let mut num = vec![0.0; k * k];
    let mut kl_trace = Vec::new();

    for iter in 1..=cfg.iterations {
        let exaggeration = if iter <= cfg.exaggeration_iters {
            cfg.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iter <= cfg.momentum_switch_iter {
            cfg.initial_momentum
        } else {
            cfg.final_momentum
        };
        let z = student_kernel(&y, k, dim, &mut num);
        accumulate_gradient(&p, &num, z, exaggeration, &y, k, dim, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("t-SNE gradient at iteration {iter}")));
        }
        if iter == 1 || iter % 50 == 0 {
            kl_trace.push((iter, kl_from_kernel(&p, &num, z, k)));
        }
        for idx in 0..k * dim {
            let same_sign = (grad[idx] > 0.0) == (update[idx] > 0.0);
            gains[idx] = if same_sign {
                (gains[idx] * 0.8).max(MIN_GAIN)
            } else {
                gains[idx] + 0.2
            };
            update[idx] = momentum * update[idx] - cfg.learning_rate * gains[idx] * grad[idx];
            y[idx] += update[idx];
        }
        for d in 0..dim {
            let mean = (0..k).map(|i| y[i * dim + d]).sum::<f64>() / k as f64;
            for i in 0..k {
                y[i * dim + d] -= mean;
            }
        }
    }
    let z = student_kernel(&y, k, dim, &mut num);
    kl_trace.push((cfg.iterations + 1, kl_from_kernel(&p, &num, z, k)));
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-SNE coordinates".into()));
    }
    Ok(TsneResult {
        embedding: Embedding::new(k, dim, y, EmbeddingKind::Tsne)?,
        kl_trace,
        perplexity,
    })
}

fn kl_from_kernel(p: &[f64], num: &[f64], z: f64, k: usize) -> f64 {
    let mut kl = 0.0;
    for i in 0..k {
        for j in 0..k {
            let pij = p[i * k + j];
            if i != j && pij > 0.0 {
                kl += pij * (pij * z / num[i * k + j]).ln();
            }
        }
    }
    kl
}
