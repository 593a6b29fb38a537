//! DTMM and the four ablation baselines as stage chains.

use std::cell::{OnceCell, RefCell};
use std::rc::Rc;
use std::collections::BTreeMap;
use std::time::Instant;

use log::info;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::cost_matrix;
use crate::cluster::select::{selection_from_sweep, sweep_k, KSweepEntry};
use crate::cluster::silhouette_score;
use crate::config::Config;
use crate::embed::mds::{coordinates, double_center, elbow_dimension, explained_variance_dimension, sorted_eigen};
use crate::embed::{nonmetric_mds, tsne_embed, SmacofResult, TsneConfig, TsneResult};
use crate::error::{Error, Result};
use crate::metrics::Scores;
use crate::minimax::{build_graph, minimax_matrix, WeightedGraph};
use crate::report::{CurvePoint, Diagnostics, RunReport};
use crate::rng;
use crate::scenario::{self, AUGMENTER_SCALES};
use crate::trajectory::{Embedding, Labeling, SymMatrix, TrajectorySet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dtmm,
    B1,
    B2,
    B3,
    B4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Dtw,
    Tsne,
    Nmds,
    /// Minimax distances over the current embedding (or over C directly).
    Mm,
    Mds,
    /// GMM or k-means with silhouette selection.
    Cluster,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Dtw => "dtw",
            Stage::Tsne => "tsne",
            Stage::Nmds => "nmds",
            Stage::Mm => "mm",
            Stage::Mds => "mds",
            Stage::Cluster => "cluster",
        }
    }
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Dtmm, Method::B1, Method::B2, Method::B3, Method::B4];

    pub fn stages(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            Method::Dtmm => &[Dtw, Tsne, Mm, Mds, Cluster],
            Method::B1 => &[Dtw, Tsne, Cluster],
            Method::B2 => &[Dtw, Nmds, Cluster],
            Method::B3 => &[Dtw, Nmds, Mm, Mds, Cluster],
            Method::B4 => &[Dtw, Mm, Mds, Cluster],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dtmm => "dtmm",
            Method::B1 => "b1",
            Method::B2 => "b2",
            Method::B3 => "b3",
            Method::B4 => "b4",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method `{s}` (dtmm, b1, b2, b3, b4)"))
    }
}

/// Eigen-decomposition of a double-centered Minimax matrix, kept so that
/// several target dimensions can be read off one decomposition.
pub struct MinimaxSpectrum {
    pub matrix: SymMatrix,
    pub eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl MinimaxSpectrum {
    fn new(graph: &WeightedGraph) -> Result<Self> {
        let matrix = minimax_matrix(graph)?;
        let (eigenvalues, eigenvectors) = sorted_eigen(double_center(&matrix))?;
        Ok(Self {
            matrix,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn elbow(&self) -> usize {
        elbow_dimension(&self.eigenvalues)
    }

    pub fn embedding(&self, dim: usize) -> Result<Embedding> {
        let k = self.matrix.order();
        if dim == 0 || dim > k {
            return Err(Error::invalid(format!("MDS dimension {dim} not in 1..={k}")));
        }
        coordinates(&self.eigenvalues, &self.eigenvectors, dim)
    }
}

/// Everything produced by one method run besides the report.
pub struct RunOutput {
    pub report: RunReport,
    /// Embedding the clustering ran on.
    pub embedding: Embedding,
    /// First embedding of the chain (V for t-SNE chains, the nMDS output for
    /// nMDS chains).
    pub first_embedding: Option<Embedding>,
    pub minimax: Option<SymMatrix>,
}

/// Lazily computed, shared stage outputs for one trajectory set.
///
/// Methods that share a prefix of their chains (all five start with DTW,
/// DTMM and B1 share t-SNE, B2 and B3 share nMDS) reuse it.
pub struct Workbench<'a> {
    name: String,
    set: &'a TrajectorySet,
    cfg: &'a Config,
    truth: Option<Labeling>,
    cost: OnceCell<SymMatrix>,
    tsne: OnceCell<TsneResult>,
    b2_dim: OnceCell<usize>,
    nmds: RefCell<BTreeMap<usize, Rc<SmacofResult>>>,
    mm_tsne: OnceCell<MinimaxSpectrum>,
    mm_nmds: OnceCell<MinimaxSpectrum>,
    mm_cost: OnceCell<MinimaxSpectrum>,
    timings: RefCell<BTreeMap<String, f64>>,
}

impl<'a> Workbench<'a> {
    pub fn new(name: impl Into<String>, set: &'a TrajectorySet, cfg: &'a Config) -> Result<Self> {
        if set.len() < 3 {
            return Err(Error::invalid(format!("need at least 3 trajectories, got {}", set.len())));
        }
        Ok(Self {
            name: name.into(),
            set,
            cfg,
            truth: set.truth_labeling().map(|(l, _)| l),
            cost: OnceCell::new(),
            tsne: OnceCell::new(),
            b2_dim: OnceCell::new(),
            nmds: Default::default(),
            mm_tsne: OnceCell::new(),
            mm_nmds: OnceCell::new(),
            mm_cost: OnceCell::new(),
            timings: Default::default(),
        })
    }

    pub fn truth(&self) -> Option<&Labeling> {
        self.truth.as_ref()
    }

    fn timed<T>(&self, label: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        let ms = start.elapsed().as_secs_f64() * 1e3;
        info!("{} {label}: {ms:.0} ms", self.name);
        self.timings.borrow_mut().insert(label.to_owned(), ms);
        out
    }

    fn cached<'s, T>(
        &'s self,
        cell: &'s OnceCell<T>,
        label: &str,
        stage: Stage,
        f: impl FnOnce() -> Result<T>,
    ) -> Result<&'s T> {
        if let Some(v) = cell.get() {
            return Ok(v);
        }
        let v = self.timed(label, f).map_err(|e| e.in_stage(stage.as_str()))?;
        Ok(cell.get_or_init(|| v))
    }

    pub fn cost(&self) -> Result<&SymMatrix> {
        self.cached(&self.cost, "dtw", Stage::Dtw, || cost_matrix(self.set, &self.cfg.dtw))
    }

    pub fn tsne(&self) -> Result<&TsneResult> {
        let c = self.cost()?;
        self.cached(&self.tsne, "tsne", Stage::Tsne, || {
            let cfg = TsneConfig {
                seed: rng::derive_seed(self.cfg.seed, "tsne"),
                ..self.cfg.tsne.clone()
            };
            tsne_embed(c, &cfg)
        })
    }

    /// B2's nMDS dimension: configured, else the smallest explaining the
    /// configured share of the classical-MDS spectrum of the squared costs.
    fn nmds_dim(&self, method: Method, c: &SymMatrix) -> Result<usize> {
        if method == Method::B3 {
            return Ok(self.cfg.embed.b3_nmds_dim);
        }
        if let Some(d) = self.cfg.embed.nmds_dim {
            return Ok(d);
        }
        let dim = self.cached(&self.b2_dim, "nmds/dim", Stage::Nmds, || {
            let squared = c.map(|v| v * v)?;
            let (values, _) = sorted_eigen(double_center(&squared))?;
            Ok(explained_variance_dimension(&values, self.cfg.embed.nmds_variance_ratio).min(c.order()))
        })?;
        Ok(*dim)
    }

    /// Non-metric MDS of C for `method` (B2 or B3), cached per dimension.
    pub fn nmds(&self, method: Method) -> Result<Rc<SmacofResult>> {
        let c = self.cost()?;
        let dim = self.nmds_dim(method, c)?;
        if let Some(s) = self.nmds.borrow().get(&dim) {
            return Ok(Rc::clone(s));
        }
        let mds = self
            .cfg
            .embed
            .mds_config(Some(dim), rng::derive_seed(self.cfg.seed, "nmds"));
        let out = Rc::new(
            self.timed(&format!("nmds/{dim}"), || nonmetric_mds(c, &mds))
                .map_err(|e| e.in_stage(Stage::Nmds.as_str()))?,
        );
        self.nmds.borrow_mut().insert(dim, Rc::clone(&out));
        Ok(out)
    }

    fn minimax_of(&self, method: Method) -> Result<&MinimaxSpectrum> {
        match method {
            Method::Dtmm => {
                let v = &self.tsne()?.embedding;
                self.cached(&self.mm_tsne, "mm+mds/tsne", Stage::Mm, || {
                    MinimaxSpectrum::new(&build_graph(v)?)
                })
            }
            Method::B3 => {
                if let Some(s) = self.mm_nmds.get() {
                    return Ok(s);
                }
                let s = self.nmds(Method::B3)?;
                self.cached(&self.mm_nmds, "mm+mds/nmds", Stage::Mm, || {
                    MinimaxSpectrum::new(&build_graph(&s.embedding)?)
                })
            }
            Method::B4 => {
                let c = self.cost()?;
                self.cached(&self.mm_cost, "mm+mds/dtw", Stage::Mm, || {
                    MinimaxSpectrum::new(&WeightedGraph::from_matrix(c.clone()))
                })
            }
            Method::B1 | Method::B2 => unreachable!("chain has no Minimax stage"),
        }
    }

    pub fn run(&self, method: Method) -> Result<RunOutput> {
        self.run_with_dim(method, None)
    }

    /// Runs `method`; `mm_dim` overrides the MDS dimension after Minimax.
    pub fn run_with_dim(&self, method: Method, mm_dim: Option<usize>) -> Result<RunOutput> {
        let mut diagnostics = Diagnostics::default();
        let mut seeds = BTreeMap::new();
        seeds.insert("run".to_owned(), self.cfg.seed);
        let mut first_embedding = None;
        let mut minimax = None;

        let embedding = match method {
            Method::B1 | Method::Dtmm => {
                let t = self.tsne()?;
                seeds.insert("tsne".to_owned(), rng::derive_seed(self.cfg.seed, "tsne"));
                diagnostics.tsne_perplexity = Some(t.perplexity);
                diagnostics.tsne_final_kl = Some(t.final_kl());
                first_embedding = Some(t.embedding.clone());
                if method == Method::B1 {
                    Some(t.embedding.clone())
                } else {
                    None
                }
            }
            Method::B2 | Method::B3 => {
                let s = self.nmds(method)?;
                diagnostics.nmds_dim = Some(s.embedding.dim());
                diagnostics.nmds_normalized_stress = Some(s.normalized_stress);
                first_embedding = Some(s.embedding.clone());
                if method == Method::B2 {
                    Some(s.embedding.clone())
                } else {
                    None
                }
            }
            Method::B4 => None,
        };
        let embedding = match embedding {
            Some(e) => e,
            None => {
                let spec = self.minimax_of(method)?;
                let elbow = spec.elbow();
                diagnostics.elbow_dim = Some(elbow);
                diagnostics.mm_eigenvalues = spec.eigenvalues.iter().take(10).copied().collect();
                let dim = match (method, mm_dim.or(self.cfg.embed.mm_dim)) {
                    (_, Some(d)) => d,
                    (Method::B3, None) => self.cfg.embed.b3_mm_dim,
                    (_, None) => elbow,
                };
                minimax = Some(spec.matrix.clone());
                spec.embedding(dim).map_err(|e| e.in_stage(Stage::Mds.as_str()))?
            }
        };
        diagnostics.embedding_dim = embedding.dim();

        let cluster_seed = rng::derive_seed(self.cfg.seed, "cluster");
        seeds.insert("cluster".to_owned(), cluster_seed);
        let opts = &self.cfg.cluster;
        let ks = match opts.k {
            Some(k) => vec![k],
            None => opts.ks.clone(),
        };
        let entries = self
            .timed(&format!("cluster/{method}"), || {
                sweep_k(&embedding, &ks, opts.method, cluster_seed, &opts.gmm)
            })
            .map_err(|e| e.in_stage(Stage::Cluster.as_str()))?;
        let curve = self.curve(&entries)?;
        let (selection, labeling) = selection_from_sweep(entries);
        let silhouette = if labeling.k() >= 2 {
            silhouette_score(&embedding, &labeling).map_err(|e| e.in_stage(Stage::Cluster.as_str()))?
        } else {
            selection.silhouettes[0]
        };
        let scores = match &self.truth {
            Some(t) => Some(Scores::compute(t, &labeling)?),
            None => None,
        };

        let report = RunReport {
            set: self.name.clone(),
            method,
            stages: method.stages().to_vec(),
            k: selection.best_k,
            silhouette,
            scores,
            curve,
            labeling,
            seeds,
            diagnostics,
            timings_ms: self.cfg.output.timings.then(|| self.timings.borrow().clone()),
            config: self
                .cfg
                .entries()
                .into_iter()
                .map(|(k, v)| (k.to_owned(), v))
                .collect(),
        };
        Ok(RunOutput {
            report,
            embedding,
            first_embedding,
            minimax,
        })
    }

    fn curve(&self, entries: &[KSweepEntry]) -> Result<Vec<CurvePoint>> {
        let mut points: Vec<CurvePoint> = entries
            .iter()
            .map(|x| {
                Ok(CurvePoint {
                    k: x.k,
                    populated: x.labeling.k(),
                    silhouette: x.silhouette,
                    scores: match &self.truth {
                        Some(t) => Some(Scores::compute(t, &x.labeling)?),
                        None => None,
                    },
                })
            })
            .collect::<Result<_>>()?;
        points.sort_by_key(|p| p.k);
        Ok(points)
    }
}

/// Runs one method on one set with fresh stage caches.
pub fn run_method(name: &str, set: &TrajectorySet, method: Method, cfg: &Config) -> Result<RunReport> {
    Ok(Workbench::new(name, set, cfg)?.run(method)?.report)
}

/// DTMM on Set4, Set5 and Set6.
pub fn run_augmentation_study(n: usize, seed: u64, cfg: &Config) -> Result<Vec<RunReport>> {
    let sets = scenario::build_evaluation_sets(n, seed)?;
    ["Set4", "Set5", "Set6"]
        .par_iter()
        .map(|name| run_method(name, &sets[*name], Method::Dtmm, cfg))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScarcityRow {
    pub divisor: usize,
    pub real_cut_ins: usize,
    pub synthetic_cut_ins: usize,
    pub scarce: RunReport,
    pub augmented: RunReport,
}

/// For every divisor `q`: DTMM on `n` left + `n` right + `n/q` real cut-ins,
/// and on the same set plus `n/2` synthetic cut-ins from the first
/// augmenter.
pub fn scarcity_sweep(n: usize, divisors: &[usize], seed: u64, cfg: &Config) -> Result<Vec<ScarcityRow>> {
    let scale = AUGMENTER_SCALES[0].1;
    divisors
        .par_iter()
        .map(|&q| {
            if q == 0 || n / q == 0 {
                return Err(Error::invalid(format!("divisor {q} leaves no cut-ins for n = {n}")));
            }
            let real = n / q;
            let scarce = scenario::scarce_set(n, real, 0, scale, seed)?;
            let augmented = scenario::scarce_set(n, real, n / 2, scale, seed)?;
            Ok(ScarcityRow {
                divisor: q,
                real_cut_ins: real,
                synthetic_cut_ins: n / 2,
                scarce: run_method(&format!("Set4/{q}"), &scarce, Method::Dtmm, cfg)?,
                augmented: run_method(&format!("Set5/{q}"), &augmented, Method::Dtmm, cfg)?,
            })
        })
        .collect()
}
