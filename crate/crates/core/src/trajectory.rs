//! Core value types shared by every stage.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for symmetry checks on [`SymMatrix`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Position of a surrounding vehicle relative to the ego vehicle, in meters.
///
/// `lateral` is positive to the left, `longitudinal` positive ahead.
/// Serialized as the two-element array `[lateral, longitudinal]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub lateral: f64,
    pub longitudinal: f64,
}

impl Point2 {
    pub const fn new(lateral: f64, longitudinal: f64) -> Self {
        Self {
            lateral,
            longitudinal,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lateral.is_finite() && self.longitudinal.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([lateral, longitudinal]: [f64; 2]) -> Self {
        Self::new(lateral, longitudinal)
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.lateral, p.longitudinal]
    }
}

pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 10;

/// One tracked object: an ordered, non-empty sequence of relative positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    id: String,
    points: Vec<Point2>,
    sample_rate_hz: u32,
    truth_label: Option<String>,
}

impl Trajectory {
    pub fn new(
        id: impl Into<String>,
        points: Vec<Point2>,
        sample_rate_hz: u32,
        truth_label: Option<String>,
    ) -> Result<Self> {
        let id = id.into();
        if points.is_empty() {
            return Err(Error::EmptyTrajectory(id));
        }
        if let Some(j) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("trajectory `{id}` point {j}")));
        }
        if sample_rate_hz == 0 {
            return Err(Error::invalid(format!("trajectory `{id}`: sample rate must be positive")));
        }
        Ok(Self {
            id,
            points,
            sample_rate_hz,
            truth_label,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn truth_label(&self) -> Option<&str> {
        self.truth_label.as_deref()
    }

    /// Duration in seconds covered by the samples.
    pub fn duration_s(&self) -> f64 {
        self.points.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

/// An ordered collection of trajectories with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectorySet {
    trajectories: Vec<Trajectory>,
    provenance: BTreeMap<String, String>,
}

impl TrajectorySet {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        Self::with_provenance(trajectories, BTreeMap::new())
    }

    pub fn with_provenance(
        trajectories: Vec<Trajectory>,
        provenance: BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(trajectories.len());
        for t in &trajectories {
            if !seen.insert(t.id()) {
                return Err(Error::DuplicateId(t.id().to_owned()));
            }
        }
        Ok(Self {
            trajectories,
            provenance,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn provenance(&self) -> &BTreeMap<String, String> {
        &self.provenance
    }

    pub fn provenance_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.provenance
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.trajectories.iter().map(Trajectory::id)
    }

    /// Ground-truth labeling when every trajectory carries a truth label.
    ///
    /// Class ids follow the sorted order of the distinct label strings; the
    /// names are returned alongside.
    pub fn truth_labeling(&self) -> Option<(Labeling, Vec<String>)> {
        let tags: Option<Vec<&str>> = self.trajectories.iter().map(Trajectory::truth_label).collect();
        let tags = tags?;
        let names: Vec<String> = tags
            .iter()
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .map(str::to_owned)
            .collect();
        let labels = tags
            .iter()
            .map(|t| names.iter().position(|n| n == t).expect("name collected above"))
            .collect();
        let labeling = Labeling::new(labels, names.len().max(1)).ok()?;
        Some((labeling, names))
    }

    /// Concatenates `other` after `self`; fails on id collisions.
    pub fn concat(&self, other: &TrajectorySet) -> Result<TrajectorySet> {
        let mut all = self.trajectories.clone();
        all.extend(other.trajectories.iter().cloned());
        let mut provenance = self.provenance.clone();
        provenance.extend(other.provenance.iter().map(|(k, v)| (k.clone(), v.clone())));
        TrajectorySet::with_provenance(all, provenance)
    }

    /// Returns the sub-collection at `indices` (in that order).
    pub fn select(&self, indices: &[usize]) -> Result<TrajectorySet> {
        let picked = indices
            .iter()
            .map(|&i| {
                self.trajectories
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        TrajectorySet::with_provenance(picked, self.provenance.clone())
    }
}

/// Symmetric, zero-diagonal, non-negative K×K matrix (DTW costs, graph
/// weights, Minimax distances).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Validates a dense row-major matrix.
    pub fn new(order: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != order * order {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for order {order}, got {}",
                order * order,
                data.len()
            )));
        }
        for i in 0..order {
            let d = data[i * order + i];
            if d != 0.0 {
                return Err(Error::InvalidMatrix(format!("diagonal entry ({i},{i}) is {d}")));
            }
            for j in (i + 1)..order {
                let a = data[i * order + j];
                let b = data[j * order + i];
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NonFinite(format!("matrix entry ({i},{j})")));
                }
                if a < 0.0 || b < 0.0 {
                    return Err(Error::InvalidMatrix(format!("negative entry at ({i},{j})")));
                }
                if (a - b).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::InvalidMatrix(format!(
                        "asymmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { order, data })
    }

    /// Builds a matrix by evaluating `f(i, j)` once per unordered pair `i < j`.
    pub fn from_pairs(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = vec![0.0; order * order];
        for i in 0..order {
            for j in (i + 1)..order {
                let v = f(i, j);
                data[i * order + j] = v;
                data[j * order + i] = v;
            }
        }
        Self::new(order, data)
    }

    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            data: vec![0.0; order * order],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.order..(i + 1) * self.order]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Applies `f` to every off-diagonal entry (`f` must keep entries
    /// non-negative and finite).
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = self.order;
        let mut data = self.data.clone();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    data[i * n + j] = f(data[i * n + j]);
                }
            }
        }
        Self::new(n, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Tsne,
    ClassicalMds,
    NonmetricMds,
}

/// K points in `dim`-dimensional space, row order matching the input set.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    rows: usize,
    dim: usize,
    coords: Vec<f64>,
    kind: EmbeddingKind,
}

impl Embedding {
    pub fn new(rows: usize, dim: usize, coords: Vec<f64>, kind: EmbeddingKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        if coords.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                expected: rows * dim,
                actual: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("embedding coordinates".into()));
        }
        Ok(Self {
            rows,
            dim,
            coords,
            kind,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Keeps the first `dim` coordinates of every row.
    pub fn truncate(&self, dim: usize) -> Result<Self> {
        if dim == 0 || dim > self.dim {
            return Err(Error::invalid(format!(
                "cannot truncate {}-d embedding to {dim} dimensions",
                self.dim
            )));
        }
        let coords = (0..self.rows)
            .flat_map(|i| self.row(i)[..dim].iter().copied())
            .collect();
        Self::new(self.rows, dim, coords, self.kind)
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cluster assignment of K items into `k` clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling {
    labels: Vec<usize>,
    k: usize,
}

impl Labeling {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!("label {bad} not below k = {k}")));
        }
        Ok(Self { labels, k })
    }

    /// Renumbers arbitrary ids to `0..k` in order of first appearance.
    pub fn from_raw(raw: &[usize]) -> Self {
        let mut map: Vec<(usize, usize)> = Vec::new();
        let labels = raw
            .iter()
            .map(|&r| match map.iter().find(|(from, _)| *from == r) {
                Some(&(_, to)) => to,
                None => {
                    let to = map.len();
                    map.push((r, to));
                    to
                }
            })
            .collect();
        Self { labels, k: map.len() }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// True when both labelings induce the same partition.
    pub fn same_partition(&self, other: &Labeling) -> bool {
        self.len() == other.len() && Labeling::from_raw(&self.labels) == Labeling::from_raw(&other.labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_rejects_empty_and_non_finite() {
        assert!(matches!(
            Trajectory::new("a", vec![], 10, None),
            Err(Error::EmptyTrajectory(_))
        ));
        assert!(matches!(
            Trajectory::new("a", vec![Point2::new(f64::NAN, 0.0)], 10, None),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn set_rejects_duplicate_ids() {
        let t = Trajectory::new("x", vec![Point2::new(0.0, 0.0)], 10, None).unwrap();
        assert!(matches!(
            TrajectorySet::new(vec![t.clone(), t]),
            Err(Error::DuplicateId(id)) if id == "x"
        ));
    }

    #[test]
    fn sym_matrix_validation() {
        assert!(SymMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
        assert!(SymMatrix::new(2, vec![0.0, 1.0, 1.0 + 1e-11, 0.0]).is_err());
        assert!(SymMatrix::new(2, vec![0.0, 1.0, 1.0 + 1e-13, 0.0]).is_ok());
        assert!(SymMatrix::new(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
        assert!(SymMatrix::new(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(SymMatrix::new(2, vec![0.0, f64::INFINITY, f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn labeling_checks_range_and_compacts() {
        assert!(Labeling::new(vec![0, 2], 2).is_err());
        let l = Labeling::from_raw(&[5, 5, 2, 9, 2]);
        assert_eq!(l.labels(), &[0, 0, 1, 2, 1]);
        assert_eq!(l.k(), 3);
        assert!(l.same_partition(&Labeling::new(vec![2, 2, 0, 1, 0], 3).unwrap()));
    }

    #[test]
    fn truth_labeling_sorted_names() {
        let mk = |id: &str, tag: &str| {
            Trajectory::new(id, vec![Point2::new(0.0, 0.0)], 10, Some(tag.into())).unwrap()
        };
        let set = TrajectorySet::new(vec![mk("a", "z"), mk("b", "c"), mk("c", "z")]).unwrap();
        let (l, names) = set.truth_labeling().unwrap();
        assert_eq!(names, vec!["c", "z"]);
        assert_eq!(l.labels(), &[1, 0, 1]);
    }
}
