//! Full-covariance Gaussian mixture fitted by EM.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cluster::kmeans_plus_plus;
use crate::error::{Error, Result};
use crate::rng;
use crate::trajectory::{squared_distance, Embedding, Labeling};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
/// Responsibility mass below which a component counts as empty.
const DEGENERATE_MASS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative log-likelihood change below which EM stops.
    pub tol: f64,
    /// Covariance eigenvalues are kept at or above `ridge * trace(S) / d`,
    /// with `S` the covariance of the whole data set.
    pub ridge: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iter: 500,
            tol: 1e-8,
            ridge: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub k: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    /// `k` rows of length `dim`.
    pub means: Vec<Vec<f64>>,
    /// `k` row-major `dim × dim` matrices.
    pub covariances: Vec<Vec<f64>>,
    /// Total log-likelihood before every M-step, ending at the returned model.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    /// Components re-seeded after their responsibility mass vanished.
    pub reinitializations: usize,
}

impl GmmModel {
    pub fn log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().expect("trace is never empty")
    }

    pub fn covariance(&self, c: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.covariances[c])
    }

    /// `log(w_c) + log N(x | μ_c, Σ_c)` for every component.
    pub fn log_weighted_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        let comps = self.components()?;
        Ok(comps.iter().map(|c| c.log_weighted_density(x)).collect())
    }

    fn components(&self) -> Result<Vec<Component>> {
        (0..self.k)
            .map(|c| Component::new(self.weights[c], self.means[c].clone(), self.covariance(c)))
            .collect()
    }
}

struct Component {
    weight: f64,
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl Component {
    fn new(weight: f64, mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::invalid("covariance is not positive definite"))?
            .l();
        let log_det: f64 = (0..d).map(|i| chol[(i, i)].ln()).sum::<f64>() * 2.0;
        Ok(Self {
            weight,
            mean,
            cov,
            chol,
            log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
        })
    }

    fn log_weighted_density(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(a, b)| a - b));
        let z = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
        self.weight.ln() + self.log_norm - 0.5 * z.norm_squared()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Raises every eigenvalue of `cov` to at least `floor`.
fn floor_eigenvalues(cov: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = (&cov + cov.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
}

fn data_covariance(e: &Embedding) -> (Vec<f64>, DMatrix<f64>) {
    let (n, d) = (e.rows(), e.dim());
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(e.row(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..n {
        let row = e.row(i);
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (row[a] - mean[a]) * (row[b] - mean[b]);
            }
        }
    }
    (mean, cov / n as f64)
}

/// Pooled within-group covariance after assigning every point to its
/// nearest seed point.
fn pooled_within(e: &Embedding, seeds: &[usize]) -> DMatrix<f64> {
    let (n, d, k) = (e.rows(), e.dim(), seeds.len());
    let assign: Vec<usize> = (0..n)
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for (c, &s) in seeds.iter().enumerate() {
                let dist = squared_distance(e.row(i), e.row(s));
                if dist < best.1 {
                    best = (c, dist);
                }
            }
            best.0
        })
        .collect();
    let mut means = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in assign.iter().enumerate() {
        counts[c] += 1;
        for (m, x) in means[c].iter_mut().zip(e.row(i)) {
            *m += x;
        }
    }
    for (m, &cnt) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= cnt.max(1) as f64);
    }
    let mut cov = DMatrix::zeros(d, d);
    for (i, &c) in assign.iter().enumerate() {
        let row = e.row(i);
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (row[a] - means[c][a]) * (row[b] - means[c][b]);
            }
        }
    }
    cov / n as f64
}

pub fn fit_gmm(e: &Embedding, k: usize, seed: u64) -> Result<GmmModel> {
    fit_gmm_with(e, k, seed, &GmmConfig::default())
}

/// Best of `cfg.restarts` EM runs by final log-likelihood; earlier restarts
/// win ties.
pub fn fit_gmm_with(e: &Embedding, k: usize, seed: u64, cfg: &GmmConfig) -> Result<GmmModel> {
    let n = e.rows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cannot fit {k} components to {n} points")));
    }
    if cfg.restarts == 0 || cfg.max_iter == 0 {
        return Err(Error::invalid("GMM needs at least one restart and one iteration"));
    }
    if e.coords().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("GMM input".into()));
    }
    let (_, pooled) = data_covariance(e);
    let floor = (cfg.ridge * pooled.trace() / e.dim() as f64).max(1e-12);
    let pooled = floor_eigenvalues(pooled, floor);
    let mut best: Option<GmmModel> = None;
    for r in 0..cfg.restarts {
        let model = run_em(e, k, rng::derive_indexed(seed, r as u64), cfg, &pooled, floor)?;
        if best.as_ref().is_none_or(|b| model.log_likelihood() > b.log_likelihood()) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn run_em(
    e: &Embedding,
    k: usize,
    seed: u64,
    cfg: &GmmConfig,
    pooled: &DMatrix<f64>,
    floor: f64,
) -> Result<GmmModel> {
    let (n, d) = (e.rows(), e.dim());
    let mut stream = <rng::StreamRng as rand::SeedableRng>::seed_from_u64(seed);
    let seeds = kmeans_plus_plus(e, k, &mut stream);
    let within = floor_eigenvalues(pooled_within(e, &seeds), floor);
    let mut comps: Vec<Component> = seeds
        .iter()
        .map(|&i| Component::new(1.0 / k as f64, e.row(i).to_vec(), within.clone()))
        .collect::<Result<_>>()?;

    let mut trace = Vec::new();
    let mut reinitializations = 0;
    let mut resp = vec![0.0; n * k];
    let mut point_ll = vec![0.0; n];
    let mut logs = vec![0.0; k];
    let mut iterations = 0;
    loop {
        // E-step
        let mut total = 0.0;
        for i in 0..n {
            let x = e.row(i);
            for (c, comp) in comps.iter().enumerate() {
                logs[c] = comp.log_weighted_density(x);
            }
            let lse = log_sum_exp(&logs);
            point_ll[i] = lse;
            total += lse;
            for c in 0..k {
                resp[i * k + c] = (logs[c] - lse).exp();
            }
        }
        if !total.is_finite() {
            return Err(Error::NonFinite("GMM log-likelihood".into()));
        }
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| (total - prev).abs() <= cfg.tol * prev.abs());
        trace.push(total);
        if converged || iterations == cfg.max_iter {
            break;
        }
        iterations += 1;

        // M-step
        let mut next = Vec::with_capacity(k);
        for c in 0..k {
            let mass: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            if mass < DEGENERATE_MASS {
                let worst = (0..n)
                    .min_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]))
                    .expect("n ≥ 1");
                reinitializations += 1;
                next.push((mass.max(DEGENERATE_MASS), e.row(worst).to_vec(), pooled.clone()));
                continue;
            }
            let mut mean = vec![0.0; d];
            for i in 0..n {
                let r = resp[i * k + c];
                for (m, x) in mean.iter_mut().zip(e.row(i)) {
                    *m += r * x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= mass);
            let mut cov = DMatrix::zeros(d, d);
            for i in 0..n {
                let r = resp[i * k + c];
                let row = e.row(i);
                for a in 0..d {
                    let da = r * (row[a] - mean[a]);
                    for b in a..d {
                        cov[(a, b)] += da * (row[b] - mean[b]);
                    }
                }
            }
            for a in 0..d {
                for b in a..d {
                    cov[(a, b)] /= mass;
                    cov[(b, a)] = cov[(a, b)];
                }
            }
            next.push((mass, mean, floor_eigenvalues(cov, floor)));
        }
        let total_mass: f64 = next.iter().map(|t| t.0).sum();
        comps = next
            .into_iter()
            .map(|(mass, mean, cov)| Component::new(mass / total_mass, mean, cov))
            .collect::<Result<_>>()?;
    }

    Ok(GmmModel {
        k,
        dim: d,
        weights: comps.iter().map(|c| c.weight).collect(),
        means: comps.iter().map(|c| c.mean.clone()).collect(),
        covariances: comps.iter().map(|c| c.cov.transpose().as_slice().to_vec()).collect(),
        log_likelihood_trace: trace,
        iterations,
        reinitializations,
    })
}

/// Assigns each point to its most responsible component; ties go to the
/// smaller component index.
pub fn predict_labels(model: &GmmModel, e: &Embedding) -> Result<Labeling> {
    if e.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            actual: e.dim(),
        });
    }
    let comps = model.components()?;
    let labels = (0..e.rows())
        .map(|i| {
            let x = e.row(i);
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (c, comp) in comps.iter().enumerate() {
                let v = comp.log_weighted_density(x);
                if v > best_v {
                    best = c;
                    best_v = v;
                }
            }
            best
        })
        .collect();
    Labeling::new(labels, model.k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::EmbeddingKind;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(centers: &[[f64; 2]], per: usize, seed: u64) -> Embedding {
        let mut r = rng::StreamRng::seed_from_u64(seed);
        let mut coords = Vec::new();
        for c in centers {
            for _ in 0..per {
                for x in c {
                    let z: f64 = StandardNormal.sample(&mut r);
                    coords.push(x + z);
                }
            }
        }
        Embedding::new(centers.len() * per, 2, coords, EmbeddingKind::Tsne).unwrap()
    }

    #[test]
    fn single_component_is_sample_moments() {
        let e = blobs(&[[1.0, -2.0]], 40, 3);
        let m = fit_gmm(&e, 1, 0).unwrap();
        let (mean, cov) = data_covariance(&e);
        for a in 0..2 {
            assert!((m.means[0][a] - mean[a]).abs() < 1e-10);
            for b in 0..2 {
                assert!((m.covariance(0)[(a, b)] - cov[(a, b)]).abs() < 1e-10);
            }
        }
        assert!((m.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separated_blobs() {
        let e = blobs(&[[0.0, 0.0], [20.0, 0.0]], 50, 9);
        let m = fit_gmm(&e, 2, 1).unwrap();
        let l = predict_labels(&m, &e).unwrap();
        let truth = Labeling::from_raw(&[vec![0; 50], vec![1; 50]].concat());
        assert!(Labeling::from_raw(l.labels()).same_partition(&truth));
        for w in m.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_k_and_dimension() {
        let e = blobs(&[[0.0, 0.0]], 3, 1);
        assert!(fit_gmm(&e, 4, 0).is_err());
        assert!(fit_gmm(&e, 0, 0).is_err());
        let m = fit_gmm(&e, 1, 0).unwrap();
        let e1 = Embedding::new(3, 1, vec![0.0, 1.0, 2.0], EmbeddingKind::Tsne).unwrap();
        assert!(matches!(predict_labels(&m, &e1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn coincident_points_stay_finite() {
        let e = Embedding::new(6, 2, vec![1.0; 12], EmbeddingKind::Tsne).unwrap();
        let m = fit_gmm(&e, 2, 0).unwrap();
        assert!(m.log_likelihood().is_finite());
    }
}
