use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use dtmm_core::config::{parse_ks, Config};
use dtmm_core::io::{self, LabelingFile};
use dtmm_core::metrics::{self, Scores};
use dtmm_core::pipeline::{Method, Workbench};
use dtmm_core::plot;
use dtmm_core::report::{self, RunReport, CURVE_METRICS};
use dtmm_core::scenario::{self, Scenario, ScenarioSpec};
use dtmm_core::{Labeling, TrajectorySet};

#[derive(Parser, Debug)]
#[command(name = "dtmm", version, about = "Cluster variable-length 2-D trajectories (DTW, t-SNE, Minimax, MDS, GMM)")]
struct Cli {
    /// Run seed; overrides `seed` from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// t-SNE perplexity; overrides `tsne.perplexity`.
    #[arg(long, global = true)]
    perplexity: Option<f64>,
    /// Directory for all outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic scenario trajectories.
    Generate(GenerateArgs),
    /// Run one method on a dataset.
    Cluster(ClusterArgs),
    /// Per-k silhouette and score curves for several methods.
    Sweep(SweepArgs),
    /// Score a labeling against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SetCollection {
    /// Set1..Set6 (three length ranges, reduced and augmented cut-ins).
    Table1,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Generate a named collection of evaluation sets.
    #[arg(long, conflicts_with = "scenario")]
    sets: Option<SetCollection>,
    /// Trajectories per scenario for `--sets` (256, 512 or 1024).
    #[arg(long)]
    n: Option<usize>,
    /// Generate a single scenario (cut-in, drive-by-left, drive-by-right).
    #[arg(long, required_unless_present = "sets")]
    scenario: Option<Scenario>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Output directory for `--sets`, output file for `--scenario`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long)]
    method: Method,
    #[arg(long)]
    input: PathBuf,
    /// `auto` for silhouette selection, or a fixed cluster count.
    #[arg(long, default_value = "auto")]
    k: String,
    /// Dataset name used in reports and output file names (default: input stem).
    #[arg(long)]
    name: Option<String>,
    /// Write the clustered embedding as an SVG scatter plot.
    #[arg(long)]
    emit_plot: Option<PathBuf>,
    /// Write the clustered embedding as CSV.
    #[arg(long)]
    emit_embedding: Option<PathBuf>,
    /// Persist C, V, M and E matrices.
    #[arg(long)]
    emit_intermediate: bool,
    /// Append the report to this JSON Lines file.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Record stage timings in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated methods.
    #[arg(long, default_value = "dtmm,b1,b2,b3,b4", value_delimiter = ',')]
    methods: Vec<Method>,
    /// Candidate cluster counts, e.g. `2..7` or `2,3,5`.
    #[arg(long)]
    ks: Option<String>,
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Labeling JSON to score.
    #[arg(long)]
    pred: PathBuf,
    /// Truth: a labeled trajectory JSONL file or a labeling JSON.
    #[arg(long)]
    truth: PathBuf,
    /// Output JSON file (default: <out-dir>/evaluation.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .with_context(|| format!("override `{o}` is not KEY=VALUE"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(p) = cli.perplexity {
        cfg.set("tsne.perplexity", &p.to_string())?;
    }
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    match cli.command {
        Command::Generate(a) => generate(&cfg, &cli.out_dir, a),
        Command::Cluster(a) => cluster(cfg, &cli.out_dir, a),
        Command::Sweep(a) => sweep(cfg, &cli.out_dir, a),
        Command::Evaluate(a) => evaluate(&cli.out_dir, a),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn scenario_counts(set: &TrajectorySet) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in set.trajectories() {
        *counts.entry(t.truth_label().unwrap_or("unlabeled").to_owned()).or_insert(0) += 1;
    }
    counts
}

fn generate(cfg: &Config, out_dir: &Path, a: GenerateArgs) -> Result<()> {
    if a.sets.is_some() {
        let n = a.n.unwrap_or(cfg.generate.n);
        let dir = a.out.unwrap_or_else(|| out_dir.to_path_buf());
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, set) in scenario::build_evaluation_sets(n, cfg.seed)? {
            let path = dir.join(format!("{name}.jsonl"));
            io::save_trajectories(&set, &path)?;
            let synthetic = set.provenance().get("synthetic_count").cloned().unwrap_or_default();
            println!(
                "{name}: {} trajectories {:?} synthetic={synthetic} -> {}",
                set.len(),
                scenario_counts(&set),
                path.display()
            );
        }
        return Ok(());
    }
    let scenario = a.scenario.expect("clap enforces --scenario without --sets");
    let g = &cfg.generate;
    let spec = ScenarioSpec {
        length_range_s: g.length_range_s,
        lane_offset_m: g.lane_offset_m,
        noise_sigma_m: g.noise_sigma_m,
        perturb_scale: g.perturb_scale,
        ..ScenarioSpec::new(scenario, a.count, cfg.seed)
    };
    let set = scenario::generate(&spec)?;
    let path = a.out.unwrap_or_else(|| out_dir.join(format!("{scenario}.jsonl")));
    io::save_trajectories(&set, &path)?;
    println!("{scenario}: {} trajectories -> {}", set.len(), path.display());
    Ok(())
}

fn stem(name: &Option<String>, input: &Path) -> String {
    name.clone().unwrap_or_else(|| {
        input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "data".to_owned())
    })
}

fn cluster(mut cfg: Config, out_dir: &Path, a: ClusterArgs) -> Result<()> {
    match a.k.as_str() {
        "auto" => {}
        k => cfg.cluster.k = Some(k.parse().with_context(|| format!("--k must be `auto` or an integer, got `{k}`"))?),
    }
    cfg.output.emit_intermediate |= a.emit_intermediate;
    cfg.output.timings |= a.timings;
    let set = io::load_trajectories(&a.input)?;
    let name = stem(&a.name, &a.input);
    info!("{name}: {} trajectories", set.len());
    let wb = Workbench::new(&name, &set, &cfg)?;
    let out = wb.run(a.method)?;
    let r = &out.report;
    let ids: Vec<String> = set.ids().map(str::to_owned).collect();
    let base = out_dir.join(format!("{name}.{}", a.method));

    let labels = LabelingFile {
        k: r.labeling.k(),
        labels: r.labeling.labels().to_vec(),
        method: a.method.to_string(),
        seed: cfg.seed,
        ids: Some(ids.clone()),
    };
    io::save_labeling(&labels, with_suffix(&base, "labels.json"))?;
    write(&with_suffix(&base, "report.json"), r.to_json_line()? + "\n")?;
    if let Some(path) = &a.results {
        report::append_jsonl(std::slice::from_ref(r), path)?;
    }
    if let Some(path) = &a.emit_embedding {
        io::save_embedding(&out.embedding, ids.iter().map(String::as_str), path)?;
    }
    if let Some(path) = &a.emit_plot {
        let (shown, names) = display_labels(&set, &r.labeling)?;
        let title = format!("{name} {} (k = {})", a.method, r.k);
        write(path, plot::scatter_svg(&out.embedding, &shown, &names, &title))?;
    }
    if cfg.output.emit_intermediate {
        io::save_matrix(wb.cost()?, with_suffix(&out_dir.join(&name), "C.csv"))?;
        if let Some(v) = &out.first_embedding {
            io::save_embedding(v, ids.iter().map(String::as_str), with_suffix(&base, "V.csv"))?;
        }
        if let Some(m) = &out.minimax {
            io::save_matrix(m, with_suffix(&base, "M.csv"))?;
        }
        io::save_embedding(&out.embedding, ids.iter().map(String::as_str), with_suffix(&base, "E.csv"))?;
    }
    let stages: Vec<&str> = r.stages.iter().map(|s| s.as_str()).collect();
    println!("stages: {}", stages.join(" -> "));
    print!("{}", report::render_table(std::slice::from_ref(r)));
    Ok(())
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Labels aligned to the truth classes when the set carries them.
fn display_labels(set: &TrajectorySet, pred: &Labeling) -> Result<(Labeling, Vec<String>)> {
    match set.truth_labeling() {
        Some((truth, mut names)) => {
            let aligned = metrics::align_labels_for_display(&truth, pred)?;
            for extra in names.len()..aligned.k() {
                names.push(format!("cluster {extra}"));
            }
            Ok((aligned, names))
        }
        None => Ok((pred.clone(), (0..pred.k()).map(|c| format!("cluster {c}")).collect())),
    }
}

fn sweep(mut cfg: Config, out_dir: &Path, a: SweepArgs) -> Result<()> {
    if let Some(ks) = &a.ks {
        cfg.cluster.ks = parse_ks(ks)?;
    }
    cfg.cluster.k = None;
    let set = io::load_trajectories(&a.input)?;
    let name = stem(&a.name, &a.input);
    let wb = Workbench::new(&name, &set, &cfg)?;
    let mut reports: Vec<RunReport> = Vec::new();
    for &m in &a.methods {
        reports.push(wb.run(m)?.report);
    }
    let base = out_dir.join(format!("{name}.sweep"));
    write(&with_suffix(&base, "csv"), report::curves_csv(&reports))?;
    let mut jsonl = String::new();
    for r in &reports {
        jsonl.push_str(&r.to_json_line()?);
        jsonl.push('\n');
    }
    write(&with_suffix(&base, "jsonl"), jsonl)?;
    for metric in CURVE_METRICS {
        let series: Vec<(String, Vec<(f64, f64)>)> = reports
            .iter()
            .map(|r| {
                let pts = r
                    .curve
                    .iter()
                    .filter_map(|p| report::curve_value(p, metric).map(|v| (p.k as f64, v)))
                    .collect();
                (r.method.to_string(), pts)
            })
            .filter(|(_, pts): &(String, Vec<_>)| !pts.is_empty())
            .collect();
        if series.is_empty() {
            continue;
        }
        let svg = plot::line_svg(&series, &format!("{name}: {metric}"), "number of clusters", metric);
        write(&with_suffix(&base, &format!("{metric}.svg")), svg)?;
    }
    print!("{}", report::render_table(&reports));
    Ok(())
}

/// Truth labels and ids from a labeled dataset or a labeling file.
fn load_truth(path: &Path) -> Result<(Labeling, Option<Vec<String>>)> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        let set = io::load_trajectories(path)?;
        let (labeling, _) = set
            .truth_labeling()
            .with_context(|| format!("{} has trajectories without truth labels", path.display()))?;
        Ok((labeling, Some(set.ids().map(str::to_owned).collect())))
    } else {
        let f = io::load_labeling(path)?;
        Ok((f.labeling()?, f.ids))
    }
}

fn evaluate(out_dir: &Path, a: EvaluateArgs) -> Result<()> {
    let pred_file = io::load_labeling(&a.pred)?;
    let pred = pred_file.labeling()?;
    let (truth, truth_ids) = load_truth(&a.truth)?;
    let pred = match (&pred_file.ids, &truth_ids) {
        (Some(pids), Some(tids)) => {
            if pids.len() != tids.len() {
                bail!("prediction has {} ids, truth has {}", pids.len(), tids.len());
            }
            let index: BTreeMap<&str, usize> = pids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
            if index.len() != pids.len() {
                bail!("prediction ids are not unique");
            }
            let labels = tids
                .iter()
                .map(|id| {
                    index
                        .get(id.as_str())
                        .map(|&i| pred.labels()[i])
                        .with_context(|| format!("id `{id}` missing from prediction"))
                })
                .collect::<Result<Vec<_>>>()?;
            Labeling::new(labels, pred.k())?
        }
        _ => {
            if pred.len() != truth.len() {
                bail!("prediction has {} labels, truth has {}", pred.len(), truth.len());
            }
            pred
        }
    };
    let scores = Scores::compute(&truth, &pred)?;
    let raw_mi = metrics::mutual_information(&truth, &pred, false)?;
    let out = serde_json::json!({
        "RI": scores.ri,
        "MI": scores.mi,
        "MI_raw": raw_mi,
        "VM": scores.vm,
        "n": truth.len(),
    });
    let path = a.out.unwrap_or_else(|| out_dir.join("evaluation.json"));
    write(&path, serde_json::to_string(&out)? + "\n")?;
    println!("RI {}\nMI {}\nVM {}", scores.ri, scores.mi, scores.vm);
    Ok(())
}
