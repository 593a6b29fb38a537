//! Run configuration and its flat `key = value` text form.
//!
//! ```text
//! # comment
//! seed = 42
//! dtw.point_metric = l1
//! tsne.perplexity = 30
//! cluster.ks = 2..7
//! ```
//!
//! Unknown keys are errors. [`Config::to_text`] writes every key, so a
//! report can echo the effective configuration in re-loadable form.

use serde::{Deserialize, Serialize};

use crate::alignment::{Boundary, DtwConfig, PointMetric};
use crate::cluster::{ClusterMethod, GmmConfig};
use crate::embed::{MdsConfig, TsneConfig};
use crate::error::{Error, Result};
use crate::scenario::{MAX_LENGTH_S, MIN_LENGTH_S};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub method: ClusterMethod,
    pub ks: Vec<usize>,
    /// Fixed cluster count; silhouette selection over `ks` when `None`.
    pub k: Option<usize>,
    pub gmm: GmmConfig,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            method: ClusterMethod::Gmm,
            ks: (2..=7).collect(),
            k: None,
            gmm: GmmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedOptions {
    /// Classical MDS dimension after Minimax; elbow rule when `None`.
    pub mm_dim: Option<usize>,
    /// Non-metric and classical MDS dimensions of the nMDS-first Minimax chain.
    pub b3_nmds_dim: usize,
    pub b3_mm_dim: usize,
    /// Non-metric MDS dimension; explained-variance rule when `None`.
    pub nmds_dim: Option<usize>,
    pub nmds_variance_ratio: f64,
    pub smacof_max_iter: usize,
    pub smacof_eps: f64,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            mm_dim: None,
            b3_nmds_dim: 3,
            b3_mm_dim: 2,
            nmds_dim: None,
            nmds_variance_ratio: 0.95,
            smacof_max_iter: 300,
            smacof_eps: 1e-6,
        }
    }
}

impl EmbedOptions {
    pub fn mds_config(&self, target_dim: Option<usize>, seed: u64) -> MdsConfig {
        MdsConfig {
            target_dim,
            smacof_max_iter: self.smacof_max_iter,
            smacof_eps: self.smacof_eps,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateOptions {
    pub n: usize,
    pub length_range_s: (f64, f64),
    pub lane_offset_m: f64,
    pub noise_sigma_m: f64,
    pub perturb_scale: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            n: 512,
            length_range_s: (MIN_LENGTH_S, MAX_LENGTH_S),
            lane_offset_m: 3.5,
            noise_sigma_m: 0.15,
            perturb_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputOptions {
    /// Persist C, V, M and E next to the report.
    pub emit_intermediate: bool,
    /// Record wall-clock stage timings (makes reports non-reproducible).
    pub timings: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub seed: u64,
    pub dtw: DtwConfig,
    /// `tsne.seed` is ignored; stages derive their seeds from `seed`.
    pub tsne: TsneConfig,
    pub embed: EmbedOptions,
    pub cluster: ClusterOptions,
    pub generate: GenerateOptions,
    pub output: OutputOptions,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            dtw: DtwConfig::default(),
            tsne: TsneConfig::default(),
            embed: EmbedOptions::default(),
            cluster: ClusterOptions::default(),
            generate: GenerateOptions::default(),
            output: OutputOptions::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::invalid(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_auto<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    match v {
        "auto" | "none" => Ok(None),
        _ => parse_num(key, v).map(Some),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::invalid(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

/// `2..7` and `2-7` are inclusive ranges; `2,3,5` is an explicit list.
pub fn parse_ks(v: &str) -> Result<Vec<usize>> {
    let bad = || Error::invalid(format!("cannot parse cluster range `{v}`"));
    let range = v.split_once("..=").or_else(|| v.split_once("..")).or_else(|| v.split_once('-'));
    let ks: Vec<usize> = if let Some((a, b)) = range {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..=b).collect()
    } else {
        v.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

fn format_ks(ks: &[usize]) -> String {
    let contiguous = ks.windows(2).all(|w| w[1] == w[0] + 1);
    if contiguous && ks.len() > 1 {
        format!("{}..{}", ks[0], ks[ks.len() - 1])
    } else {
        ks.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    }
}

fn opt_text<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_owned(), T::to_string)
}

impl Config {
    /// Parses configuration text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Sets one key; used for both file entries and command-line overrides.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_num(key, v)?,
            "dtw.point_metric" => {
                self.dtw.point_metric = match v {
                    "l1" | "L1" => PointMetric::L1,
                    "l2" | "L2" => PointMetric::L2,
                    _ => return Err(Error::invalid(format!("`{key}`: expected l1 or l2, got `{v}`"))),
                }
            }
            "dtw.window" => self.dtw.window = parse_auto(key, v)?,
            "dtw.boundary" => {
                self.dtw.boundary = match v {
                    "full" => Boundary::Full,
                    "free_prefix" => Boundary::FreePrefix,
                    _ => return Err(Error::invalid(format!("`{key}`: expected full or free_prefix, got `{v}`"))),
                }
            }
            "tsne.perplexity" => self.tsne.perplexity = parse_num(key, v)?,
            "tsne.output_dim" => self.tsne.output_dim = parse_num(key, v)?,
            "tsne.iterations" => self.tsne.iterations = parse_num(key, v)?,
            "tsne.learning_rate" => self.tsne.learning_rate = parse_num(key, v)?,
            "tsne.initial_momentum" => self.tsne.initial_momentum = parse_num(key, v)?,
            "tsne.final_momentum" => self.tsne.final_momentum = parse_num(key, v)?,
            "tsne.momentum_switch_iter" => self.tsne.momentum_switch_iter = parse_num(key, v)?,
            "tsne.early_exaggeration" => self.tsne.early_exaggeration = parse_num(key, v)?,
            "tsne.exaggeration_iters" => self.tsne.exaggeration_iters = parse_num(key, v)?,
            "mds.dim" => self.embed.mm_dim = parse_auto(key, v)?,
            "mds.smacof_max_iter" => self.embed.smacof_max_iter = parse_num(key, v)?,
            "mds.smacof_eps" => self.embed.smacof_eps = parse_num(key, v)?,
            "nmds.dim" => self.embed.nmds_dim = parse_auto(key, v)?,
            "nmds.variance_ratio" => self.embed.nmds_variance_ratio = parse_num(key, v)?,
            "b3.nmds_dim" => self.embed.b3_nmds_dim = parse_num(key, v)?,
            "b3.mm_dim" => self.embed.b3_mm_dim = parse_num(key, v)?,
            "cluster.method" => self.cluster.method = v.parse().map_err(Error::InvalidArgument)?,
            "cluster.ks" => self.cluster.ks = parse_ks(v)?,
            "cluster.k" => self.cluster.k = parse_auto(key, v)?,
            "cluster.restarts" => self.cluster.gmm.restarts = parse_num(key, v)?,
            "gmm.max_iter" => self.cluster.gmm.max_iter = parse_num(key, v)?,
            "gmm.tol" => self.cluster.gmm.tol = parse_num(key, v)?,
            "gmm.ridge" => self.cluster.gmm.ridge = parse_num(key, v)?,
            "generate.n" => self.generate.n = parse_num(key, v)?,
            "generate.length_min_s" => self.generate.length_range_s.0 = parse_num(key, v)?,
            "generate.length_max_s" => self.generate.length_range_s.1 = parse_num(key, v)?,
            "generate.lane_offset_m" => self.generate.lane_offset_m = parse_num(key, v)?,
            "generate.noise_sigma_m" => self.generate.noise_sigma_m = parse_num(key, v)?,
            "generate.perturb_scale" => self.generate.perturb_scale = parse_num(key, v)?,
            "output.emit_intermediate" => self.output.emit_intermediate = parse_bool(key, v)?,
            "output.timings" => self.output.timings = parse_bool(key, v)?,
            _ => return Err(Error::invalid(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.tsne;
        vec![
            ("seed", self.seed.to_string()),
            ("dtw.point_metric", format!("{:?}", self.dtw.point_metric).to_lowercase()),
            ("dtw.window", opt_text(&self.dtw.window)),
            (
                "dtw.boundary",
                match self.dtw.boundary {
                    Boundary::Full => "full",
                    Boundary::FreePrefix => "free_prefix",
                }
                .to_owned(),
            ),
            ("tsne.perplexity", t.perplexity.to_string()),
            ("tsne.output_dim", t.output_dim.to_string()),
            ("tsne.iterations", t.iterations.to_string()),
            ("tsne.learning_rate", t.learning_rate.to_string()),
            ("tsne.initial_momentum", t.initial_momentum.to_string()),
            ("tsne.final_momentum", t.final_momentum.to_string()),
            ("tsne.momentum_switch_iter", t.momentum_switch_iter.to_string()),
            ("tsne.early_exaggeration", t.early_exaggeration.to_string()),
            ("tsne.exaggeration_iters", t.exaggeration_iters.to_string()),
            ("mds.dim", opt_text(&self.embed.mm_dim)),
            ("mds.smacof_max_iter", self.embed.smacof_max_iter.to_string()),
            ("mds.smacof_eps", self.embed.smacof_eps.to_string()),
            ("nmds.dim", opt_text(&self.embed.nmds_dim)),
            ("nmds.variance_ratio", self.embed.nmds_variance_ratio.to_string()),
            ("b3.nmds_dim", self.embed.b3_nmds_dim.to_string()),
            ("b3.mm_dim", self.embed.b3_mm_dim.to_string()),
            ("cluster.method", self.cluster.method.to_string()),
            ("cluster.ks", format_ks(&self.cluster.ks)),
            ("cluster.k", opt_text(&self.cluster.k)),
            ("cluster.restarts", self.cluster.gmm.restarts.to_string()),
            ("gmm.max_iter", self.cluster.gmm.max_iter.to_string()),
            ("gmm.tol", self.cluster.gmm.tol.to_string()),
            ("gmm.ridge", self.cluster.gmm.ridge.to_string()),
            ("generate.n", self.generate.n.to_string()),
            ("generate.length_min_s", self.generate.length_range_s.0.to_string()),
            ("generate.length_max_s", self.generate.length_range_s.1.to_string()),
            ("generate.lane_offset_m", self.generate.lane_offset_m.to_string()),
            ("generate.noise_sigma_m", self.generate.noise_sigma_m.to_string()),
            ("generate.perturb_scale", self.generate.perturb_scale.to_string()),
            ("output.emit_intermediate", self.output.emit_intermediate.to_string()),
            ("output.timings", self.output.timings.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cfg = Config::default();
        cfg.set("dtw.window", "5").unwrap();
        cfg.set("cluster.ks", "2,4,6").unwrap();
        cfg.set("mds.dim", "3").unwrap();
        assert_eq!(Config::parse(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(Config::parse(&Config::default().to_text()).unwrap(), Config::default());
    }

    #[test]
    fn comments_and_errors() {
        let cfg = Config::parse("# top\nseed = 7 # trailing\n\ntsne.perplexity=10\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.tsne.perplexity, 10.0);
        assert!(matches!(Config::parse("seed 7"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Config::parse("\nbogus = 1"), Err(Error::Parse { line: 2, .. })));
        assert!(Config::parse("seed = x").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_ks("2..7").unwrap(), vec![2, 3, 4, 5, 6, 7]);
        assert_eq!(parse_ks("2-4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_ks("3").unwrap(), vec![3]);
        assert!(parse_ks("a..b").is_err());
    }
}
