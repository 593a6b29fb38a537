//! Classical (Torgerson) MDS and dimension selection on its spectrum.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Embedding, EmbeddingKind, SymMatrix};

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 0; // unlimited

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsConfig {
    /// Output dimension; chosen by [`elbow_dimension`] when `None`.
    pub target_dim: Option<usize>,
    pub smacof_max_iter: usize,
    /// Relative stress decrease below which SMACOF stops.
    pub smacof_eps: f64,
    pub seed: u64,
}

impl Default for MdsConfig {
    fn default() -> Self {
        Self {
            target_dim: None,
            smacof_max_iter: 300,
            smacof_eps: 1e-6,
            seed: 0,
        }
    }
}

/// Eigenpairs of a symmetric matrix sorted by descending eigenvalue.
///
/// Each eigenvector's sign is fixed so its largest-magnitude entry is
/// positive, which keeps downstream coordinates reproducible.
pub(crate) fn sorted_eigen(matrix: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = matrix.nrows();
    let eig = matrix
        .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(src);
        let pivot = v.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for row in 0..n {
            vectors[(row, col)] = sign * v[row];
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNoConvergence);
    }
    Ok((values, vectors))
}

/// `B = -1/2 J M J` with `J = I - 11ᵀ/K`, treating `m` as squared distances.
pub fn double_center(m: &SymMatrix) -> DMatrix<f64> {
    let k = m.order();
    let kf = k as f64;
    let row_means: Vec<f64> = (0..k).map(|i| m.row(i).iter().sum::<f64>() / kf).collect();
    let grand = row_means.iter().sum::<f64>() / kf;
    DMatrix::from_fn(k, k, |i, j| -0.5 * (m.get(i, j) - row_means[i] - row_means[j] + grand))
}

#[derive(Debug, Clone)]
pub struct ClassicalMds {
    pub embedding: Embedding,
    /// All K eigenvalues of the double-centered matrix, descending.
    pub eigenvalues: Vec<f64>,
}

/// Embeds `m`, read as a matrix of squared distances, by double centering
/// and eigendecomposition.
pub fn classical_mds(m: &SymMatrix, cfg: &MdsConfig) -> Result<ClassicalMds> {
    let k = m.order();
    if k < 2 {
        return Err(Error::invalid("classical MDS needs at least 2 points"));
    }
    if let Some(d) = cfg.target_dim {
        if d == 0 || d > k {
            return Err(Error::invalid(format!("target dimension {d} not in 1..={k}")));
        }
    }
    let (values, vectors) = sorted_eigen(double_center(m))?;
    let dim = match cfg.target_dim {
        Some(d) => d,
        None => elbow_dimension(&values),
    };
    let embedding = coordinates(&values, &vectors, dim)?;
    Ok(ClassicalMds {
        embedding,
        eigenvalues: values,
    })
}

/// Scales the leading `dim` eigenvectors by the square roots of their
/// (zero-clamped) eigenvalues.
pub(crate) fn coordinates(values: &[f64], vectors: &DMatrix<f64>, dim: usize) -> Result<Embedding> {
    let k = vectors.nrows();
    let scale: Vec<f64> = values[..dim].iter().map(|&l| l.max(0.0).sqrt()).collect();
    let mut coords = Vec::with_capacity(k * dim);
    for i in 0..k {
        for (a, s) in scale.iter().enumerate() {
            coords.push(vectors[(i, a)] * s);
        }
    }
    Embedding::new(k, dim, coords, EmbeddingKind::ClassicalMds)
}

/// Largest-drop rule on a descending spectrum.
///
/// Looks at the first `min(10, len - 1)` eigenvalues (the last of the full K
/// is zero after double centering) and returns the 1-based `d` maximizing
/// `λ_d / λ_{d+1}`; ties go to the smaller `d`. A non-positive `λ_{d+1}`
/// after a positive `λ_d` counts as an infinite drop.
pub fn elbow_dimension(eigenvalues: &[f64]) -> usize {
    let considered = eigenvalues.len().saturating_sub(1).clamp(2.min(eigenvalues.len()), 10);
    let vals: Vec<f64> = eigenvalues[..considered].iter().map(|&v| v.max(0.0)).collect();
    if vals.len() < 2 {
        return 1;
    }
    let scale = vals[0];
    if scale <= 0.0 || vals.iter().all(|&v| v == vals[0]) {
        warn!("flat eigenvalue spectrum, using dimension 1");
        return 1;
    }
    let tiny = scale * 1e-12;
    let mut best = 1;
    let mut best_ratio = f64::NEG_INFINITY;
    for d in 1..vals.len() {
        let (hi, lo) = (vals[d - 1], vals[d]);
        let ratio = if hi <= tiny {
            break;
        } else if lo <= tiny {
            f64::INFINITY
        } else {
            hi / lo
        };
        if ratio > best_ratio {
            best_ratio = ratio;
            best = d;
        }
    }
    best
}

/// Smallest `d` whose leading eigenvalues carry at least `ratio` of the
/// positive spectral mass.
pub fn explained_variance_dimension(eigenvalues: &[f64], ratio: f64) -> usize {
    let total: f64 = eigenvalues.iter().filter(|&&v| v > 0.0).sum();
    if total <= 0.0 {
        return 1;
    }
    let mut acc = 0.0;
    for (d, &v) in eigenvalues.iter().enumerate() {
        acc += v.max(0.0);
        if acc >= ratio * total - 1e-12 * total {
            return d + 1;
        }
    }
    eigenvalues.len().max(1)
}
