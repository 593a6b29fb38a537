//! Pairwise dynamic time warping costs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Point2, SymMatrix, Trajectory, TrajectorySet};

/// Point-wise distance between two trajectory elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointMetric {
    /// Sum of absolute coordinate differences.
    #[default]
    L1,
    /// Euclidean distance.
    L2,
}

impl PointMetric {
    #[inline]
    pub fn distance(self, a: Point2, b: Point2) -> f64 {
        let dx = a.lateral - b.lateral;
        let dy = a.longitudinal - b.longitudinal;
        match self {
            PointMetric::L1 => dx.abs() + dy.abs(),
            PointMetric::L2 => (dx * dx + dy * dy).sqrt(),
        }
    }
}

/// Border initialization of the cumulative cost table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `D(0,0) = 0`, other border cells `+inf`: every element of both
    /// sequences is matched.
    #[default]
    Full,
    /// All border cells are `0`, so a prefix of either sequence may be
    /// skipped for free.
    FreePrefix,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DtwConfig {
    pub point_metric: PointMetric,
    /// Sakoe-Chiba band half-width in samples.
    pub window: Option<usize>,
    pub boundary: Boundary,
}

/// Minimal cumulative point-wise cost over all monotone warping paths.
pub fn dtw_cost(a: &Trajectory, b: &Trajectory, cfg: &DtwConfig) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyTrajectory(a.id().to_owned()));
    }
    if b.is_empty() {
        return Err(Error::EmptyTrajectory(b.id().to_owned()));
    }
    dtw_points(a.points(), b.points(), cfg)
}

/// [`dtw_cost`] on raw point sequences.
pub fn dtw_points(a: &[Point2], b: &[Point2], cfg: &DtwConfig) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTrajectory(String::from("<points>")));
    }
    let difference = a.len().abs_diff(b.len());
    if let Some(window) = cfg.window {
        if window < difference {
            return Err(Error::WindowInfeasible { window, difference });
        }
    }
    // Rolling rows run over the shorter sequence. The recursion is symmetric
    // under transposition, so the orientation does not change the result.
    let (outer, inner) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let m = inner.len();
    let band = cfg.window.unwrap_or(usize::MAX);
    let border = match cfg.boundary {
        Boundary::Full => f64::INFINITY,
        Boundary::FreePrefix => 0.0,
    };

    // prev[j] holds D(i-1, j) for j in 0..=m, with column 0 as the border.
    let mut prev = vec![border; m + 1];
    let mut curr = vec![border; m + 1];
    prev[0] = 0.0;
    for (i, &p) in outer.iter().enumerate() {
        let row = i + 1;
        curr[0] = border;
        for j in 1..=m {
            if row.abs_diff(j) > band {
                curr[j] = f64::INFINITY;
                continue;
            }
            let best = prev[j].min(curr[j - 1]).min(prev[j - 1]);
            curr[j] = cfg.point_metric.distance(p, inner[j - 1]) + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// All pairwise DTW costs in set order; each unordered pair is computed once.
pub fn cost_matrix(set: &TrajectorySet, cfg: &DtwConfig) -> Result<SymMatrix> {
    let k = set.len();
    if k < 2 {
        return Err(Error::invalid(format!("cost matrix needs at least 2 trajectories, got {k}")));
    }
    let ts = set.trajectories();
    let rows: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..k)
                .map(|j| dtw_cost(&ts[i], &ts[j], cfg))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut data = vec![0.0; k * k];
    for (i, row) in rows.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = i + 1 + offset;
            data[i * k + j] = v;
            data[j * k + i] = v;
        }
    }
    SymMatrix::new(k, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&(a, b)| Point2::new(a, b)).collect()
    }

    fn traj(id: &str, v: &[(f64, f64)]) -> Trajectory {
        Trajectory::new(id, pts(v), 10, None).unwrap()
    }

    #[test]
    fn worked_pair() {
        let a = traj("a", &[(0.0, 0.0), (0.0, 1.0), (0.0, 2.0)]);
        let b = traj("b", &[(0.0, 0.0), (0.0, 2.0)]);
        assert_eq!(dtw_cost(&a, &b, &DtwConfig::default()).unwrap(), 1.0);
        assert_eq!(dtw_cost(&b, &a, &DtwConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn single_points() {
        let a = traj("a", &[(0.0, 0.0)]);
        let b = traj("b", &[(0.0, -2.5)]);
        assert_eq!(dtw_cost(&a, &b, &DtwConfig::default()).unwrap(), 2.5);
        assert_eq!(dtw_cost(&a, &a, &DtwConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn l2_metric() {
        let a = pts(&[(0.0, 0.0)]);
        let b = pts(&[(3.0, 4.0)]);
        let cfg = DtwConfig {
            point_metric: PointMetric::L2,
            ..Default::default()
        };
        assert_eq!(dtw_points(&a, &b, &cfg).unwrap(), 5.0);
    }

    #[test]
    fn window_feasibility() {
        let a = pts(&[(0.0, 0.0), (0.0, 1.0), (0.0, 2.0), (0.0, 3.0)]);
        let b = pts(&[(0.0, 0.0), (0.0, 3.0)]);
        let narrow = DtwConfig {
            window: Some(1),
            ..Default::default()
        };
        assert!(matches!(
            dtw_points(&a, &b, &narrow),
            Err(Error::WindowInfeasible { window: 1, difference: 2 })
        ));
        let wide = DtwConfig {
            window: Some(2),
            ..Default::default()
        };
        let banded = dtw_points(&a, &b, &wide).unwrap();
        let free = dtw_points(&a, &b, &DtwConfig::default()).unwrap();
        assert!(banded >= free);
    }

    #[test]
    fn free_prefix_skips_leading_mismatch() {
        let a = pts(&[(9.0, 9.0), (0.0, 0.0), (0.0, 1.0)]);
        let b = pts(&[(0.0, 0.0), (0.0, 1.0)]);
        let cfg = DtwConfig {
            boundary: Boundary::FreePrefix,
            ..Default::default()
        };
        assert_eq!(dtw_points(&a, &b, &cfg).unwrap(), 0.0);
        assert_eq!(dtw_points(&a, &b, &DtwConfig::default()).unwrap(), 18.0);
    }

    #[test]
    fn cost_matrix_identical_and_embedded_pair() {
        let t = [(0.0, 1.0), (1.0, 2.0)];
        let set = TrajectorySet::new(vec![traj("x", &t), traj("y", &t), traj("z", &t)]).unwrap();
        let c = cost_matrix(&set, &DtwConfig::default()).unwrap();
        assert!(c.as_slice().iter().all(|&v| v == 0.0));

        let set = TrajectorySet::new(vec![
            traj("a", &[(0.0, 0.0), (0.0, 1.0), (0.0, 2.0)]),
            traj("b", &[(0.0, 0.0), (0.0, 2.0)]),
            traj("c", &[(5.0, 5.0)]),
        ])
        .unwrap();
        let c = cost_matrix(&set, &DtwConfig::default()).unwrap();
        assert_eq!(c.get(0, 1), 1.0);
        assert_eq!(c.get(1, 0), 1.0);
        assert_eq!(c.get(0, 2), 10.0 + 9.0 + 8.0);
    }

    #[test]
    fn cost_matrix_needs_two() {
        let set = TrajectorySet::new(vec![traj("a", &[(0.0, 0.0)])]).unwrap();
        assert!(cost_matrix(&set, &DtwConfig::default()).is_err());
    }
}
