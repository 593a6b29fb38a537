//! Synthetic driving-scenario trajectories.
//!
//! Coordinates are meters relative to the ego vehicle: lateral positive to
//! the left, longitudinal positive ahead.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::trajectory::{Point2, Trajectory, TrajectorySet, DEFAULT_SAMPLE_RATE_HZ};

pub const MIN_LENGTH_S: f64 = 3.0;
pub const MAX_LENGTH_S: f64 = 7.0;
/// Seconds a cut-in vehicle must stay in the ego lane at the end.
pub const CUT_IN_HOLD_S: f64 = 2.0;
/// Longitudinal span of a drive-by, in meters.
pub const DRIVE_BY_SPAN_M: (f64, f64) = (-60.0, 60.0);
/// Longitudinal start and end of a cut-in, in meters.
pub const CUT_IN_SPAN_M: (f64, f64) = (-8.0, 32.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    CutIn,
    DriveByLeft,
    DriveByRight,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::DriveByLeft, Scenario::DriveByRight, Scenario::CutIn];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::CutIn => "cut_in",
            Scenario::DriveByLeft => "drive_by_left",
            Scenario::DriveByRight => "drive_by_right",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "cut_in" => Ok(Scenario::CutIn),
            "drive_by_left" => Ok(Scenario::DriveByLeft),
            "drive_by_right" => Ok(Scenario::DriveByRight),
            other => Err(format!("unknown scenario `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub count: usize,
    pub length_range_s: (f64, f64),
    pub hz: u32,
    pub lane_offset_m: f64,
    pub noise_sigma_m: f64,
    /// Multiplies every random perturbation.
    pub perturb_scale: f64,
    pub seed: u64,
    /// Ids are `{prefix}-{index:04}`; defaults to the scenario name.
    pub id_prefix: Option<String>,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, count: usize, seed: u64) -> Self {
        Self {
            scenario,
            count,
            length_range_s: (MIN_LENGTH_S, MAX_LENGTH_S),
            hz: DEFAULT_SAMPLE_RATE_HZ,
            lane_offset_m: 3.5,
            noise_sigma_m: 0.15,
            perturb_scale: 1.0,
            seed,
            id_prefix: None,
        }
    }

    /// Admissible sample counts.
    fn sample_range(&self) -> Result<(usize, usize)> {
        let (lo, hi) = self.length_range_s;
        if self.hz == 0 || self.count == 0 {
            return Err(Error::invalid("scenario count and sample rate must be positive"));
        }
        if !(self.noise_sigma_m >= 0.0 && self.perturb_scale >= 0.0 && self.lane_offset_m > 0.0) {
            return Err(Error::invalid("noise, perturbation and lane offset must be non-negative"));
        }
        if !(lo <= hi) || hi > MAX_LENGTH_S + 1e-9 {
            return Err(Error::invalid(format!("length range [{lo}, {hi}] s not within [3, 7] s")));
        }
        if lo < MIN_LENGTH_S - 1e-9 {
            return Err(Error::InfeasibleSpec(format!(
                "minimum length {lo} s leaves no room for the {CUT_IN_HOLD_S} s tail and a 1 s approach"
            )));
        }
        let hz = f64::from(self.hz);
        let min_n = (lo * hz - 1e-9).ceil() as usize;
        let max_n = (hi * hz + 1e-9).floor() as usize;
        if min_n > max_n {
            return Err(Error::InfeasibleSpec(format!("no whole sample count in [{lo}, {hi}] s")));
        }
        Ok((min_n, max_n))
    }
}

/// Gaussian draw truncated to three standard deviations.
fn truncated_normal(r: &mut StreamRng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    loop {
        let z: f64 = StandardNormal.sample(r);
        if z.abs() <= 3.0 {
            return z * sigma;
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Noise-free lateral profile and longitudinal endpoints for one trajectory.
fn shape(
    scenario: Scenario,
    n: usize,
    hz: usize,
    lane: f64,
    lon: (f64, f64),
) -> Vec<Point2> {
    let lon_at = |j: usize| lerp(lon.0, lon.1, j as f64 / (n - 1) as f64);
    match scenario {
        Scenario::DriveByLeft => (0..n).map(|j| Point2::new(lane, lon_at(j))).collect(),
        Scenario::DriveByRight => (0..n).map(|j| Point2::new(-lane, lon_at(j))).collect(),
        Scenario::CutIn => {
            // Spare samples beyond the 3 s minimum are spread over the
            // approach, the hold and (twice) the lane change.
            let spare = n - 3 * hz;
            let hold = 2 * hz + spare / 4;
            let approach = (2 * hz).div_ceil(5) + spare / 4;
            let change = n - hold - approach;
            (0..n)
                .map(|j| {
                    let lat = if j < approach {
                        lane
                    } else if j < approach + change {
                        let t = (j - approach + 1) as f64 / (change + 1) as f64;
                        lane * (1.0 - smoothstep(t))
                    } else {
                        0.0
                    };
                    Point2::new(lat, lon_at(j))
                })
                .collect()
        }
    }
}

fn one_trajectory(spec: &ScenarioSpec, index: usize, stream_seed: u64, sizes: (usize, usize)) -> Result<Trajectory> {
    let mut r = StreamRng::seed_from_u64(rng::derive_indexed(stream_seed, index as u64));
    let n = r.random_range(sizes.0..=sizes.1);
    let sigma = spec.noise_sigma_m * spec.perturb_scale;
    let lane = spec.lane_offset_m + truncated_normal(&mut r, 0.5 * sigma);
    let span = match spec.scenario {
        Scenario::CutIn => CUT_IN_SPAN_M,
        _ => DRIVE_BY_SPAN_M,
    };
    let lon = (
        span.0 + truncated_normal(&mut r, 10.0 * sigma),
        span.1 + truncated_normal(&mut r, 10.0 * sigma),
    );
    let mut points = shape(spec.scenario, n, spec.hz as usize, lane, lon);
    for p in &mut points {
        p.lateral += truncated_normal(&mut r, sigma);
        p.longitudinal += truncated_normal(&mut r, sigma);
    }
    let prefix = spec.id_prefix.as_deref().unwrap_or(spec.scenario.as_str());
    Trajectory::new(
        format!("{prefix}-{index:04}"),
        points,
        spec.hz,
        Some(spec.scenario.as_str().to_owned()),
    )
}

/// Generates `spec.count` labeled trajectories. Trajectory `i` depends only
/// on `(spec, i)`, so a shorter run is a prefix of a longer one.
pub fn generate(spec: &ScenarioSpec) -> Result<TrajectorySet> {
    let sizes = spec.sample_range()?;
    let prefix = spec.id_prefix.as_deref().unwrap_or(spec.scenario.as_str());
    let stream_seed = rng::derive_seed(spec.seed, &format!("scenario/{prefix}"));
    let trajectories = (0..spec.count)
        .into_par_iter()
        .map(|i| one_trajectory(spec, i, stream_seed, sizes))
        .collect::<Result<Vec<_>>>()?;
    let mut provenance = BTreeMap::new();
    provenance.insert(format!("{prefix}.scenario"), spec.scenario.as_str().to_owned());
    provenance.insert(format!("{prefix}.seed"), spec.seed.to_string());
    provenance.insert(format!("{prefix}.perturb_scale"), spec.perturb_scale.to_string());
    TrajectorySet::with_provenance(trajectories, provenance)
}

/// Scenario recognized by the explicit geometric rules, or `None`.
///
/// Cut-in: over the last 2 s every sample has `|lateral| < 0.5` and
/// `longitudinal > 0`, while the mean lateral over the first 1 s exceeds 1.5.
/// Drive-by left/right: every lateral value above 1.5 / below -1.5.
pub fn rule_label(t: &Trajectory) -> Result<Option<Scenario>> {
    let hz = t.sample_rate_hz() as usize;
    let n = t.len();
    if n < 3 * hz {
        return Err(Error::invalid(format!(
            "trajectory `{}` has {n} samples, rules need at least {}",
            t.id(),
            3 * hz
        )));
    }
    let p = t.points();
    let tail = &p[n - 2 * hz..];
    let head_mean = p[..hz].iter().map(|q| q.lateral).sum::<f64>() / hz as f64;
    if tail.iter().all(|q| q.lateral.abs() < 0.5 && q.longitudinal > 0.0) && head_mean > 1.5 {
        return Ok(Some(Scenario::CutIn));
    }
    if p.iter().all(|q| q.lateral > 1.5) {
        return Ok(Some(Scenario::DriveByLeft));
    }
    if p.iter().all(|q| q.lateral < -1.5) {
        return Ok(Some(Scenario::DriveByRight));
    }
    Ok(None)
}

pub const SUPPORTED_SET_SIZES: [usize; 3] = [256, 512, 1024];
/// Perturbation scales of the two augmentation stand-ins (Set5, Set6).
pub const AUGMENTER_SCALES: [(&str, f64); 2] = [("Set5", 1.25), ("Set6", 1.5)];

fn scenario_set(set: &str, scenario: Scenario, count: usize, range: (f64, f64), seed: u64) -> Result<TrajectorySet> {
    let mut spec = ScenarioSpec::new(scenario, count, seed);
    spec.length_range_s = range;
    spec.id_prefix = Some(format!("{set}-{scenario}"));
    generate(&spec)
}

fn real_set(name: &str, n: usize, cut_ins: usize, range: (f64, f64), seed: u64) -> Result<TrajectorySet> {
    let mut trajectories = Vec::with_capacity(2 * n + cut_ins);
    for scenario in Scenario::ALL {
        let count = if scenario == Scenario::CutIn { cut_ins } else { n };
        trajectories.extend(scenario_set(name, scenario, count, range, seed)?.trajectories().iter().cloned());
    }
    let mut provenance = BTreeMap::new();
    provenance.insert("seed".to_owned(), seed.to_string());
    provenance.insert("length_range_s".to_owned(), format!("{}-{}", range.0, range.1));
    provenance.insert("synthetic_count".to_owned(), "0".to_owned());
    TrajectorySet::with_provenance(trajectories, provenance)
}

/// Appends `count` synthetic cut-ins drawn with `perturb_scale` and flags
/// them in the provenance.
pub fn augment(base: &TrajectorySet, name: &str, count: usize, perturb_scale: f64, seed: u64) -> Result<TrajectorySet> {
    let prefix = format!("{name}-synthetic-cut_in");
    let mut spec = ScenarioSpec::new(Scenario::CutIn, count, seed);
    spec.perturb_scale = perturb_scale;
    spec.id_prefix = Some(prefix.clone());
    let synthetic = TrajectorySet::new(generate(&spec)?.trajectories().to_vec())?;
    let mut out = base.concat(&synthetic)?;
    let prov = out.provenance_mut();
    prov.insert("synthetic_count".to_owned(), count.to_string());
    prov.insert("synthetic_id_prefix".to_owned(), prefix);
    prov.insert("synthetic_perturb_scale".to_owned(), perturb_scale.to_string());
    Ok(out)
}

/// Set4 layout with an arbitrary number of real and synthetic cut-ins:
/// `n` left and `n` right drive-bys plus `cut_ins` cut-ins from the Set3
/// streams, then `synthetic` augmenter cut-ins when non-zero.
pub fn scarce_set(
    n: usize,
    cut_ins: usize,
    synthetic: usize,
    perturb_scale: f64,
    seed: u64,
) -> Result<TrajectorySet> {
    let mut set = real_set("Set3", n, cut_ins, (MIN_LENGTH_S, MAX_LENGTH_S), seed)?;
    if synthetic > 0 {
        set = augment(&set, "Set5", synthetic, perturb_scale, seed)?;
    }
    set.provenance_mut().insert("real_cut_in_count".to_owned(), cut_ins.to_string());
    Ok(set)
}

/// The six evaluation sets keyed `Set1`..`Set6`.
///
/// Set1/Set2/Set3 hold `n` trajectories per scenario with lengths in
/// 3-4 s, 4-6 s and 3-7 s. Set4 is Set3 with only its first `n/2`
/// cut-ins; Set5 and Set6 append `n/2` synthetic cut-ins with perturbation
/// scales 1.25 and 1.5. Order within a set: left, right, cut-in, synthetic.
pub fn build_evaluation_sets(n: usize, seed: u64) -> Result<BTreeMap<String, TrajectorySet>> {
    if !SUPPORTED_SET_SIZES.contains(&n) {
        return Err(Error::invalid(format!("unsupported set size {n}; use 256, 512 or 1024")));
    }
    let ranges = [("Set1", (3.0, 4.0)), ("Set2", (4.0, 6.0)), ("Set3", (3.0, 7.0))];
    let mut sets = BTreeMap::new();
    for (name, range) in ranges {
        sets.insert(name.to_owned(), real_set(name, n, n, range, seed)?);
    }
    let set4 = real_set("Set3", n, n / 2, ranges[2].1, seed)?;
    for (name, scale) in AUGMENTER_SCALES {
        sets.insert(name.to_owned(), augment(&set4, name, n / 2, scale, seed)?);
    }
    sets.insert("Set4".to_owned(), set4);
    Ok(sets)
}
