//! Run reports and their tabular / JSON renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Scores;
use crate::pipeline::{Method, Stage};
use crate::trajectory::Labeling;

/// One point of a per-`k` curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    /// Clusters actually populated by the fit.
    pub populated: usize,
    pub silhouette: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Scores>,
}

/// Stage diagnostics that do not depend on wall-clock time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tsne_perplexity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tsne_final_kl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmds_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmds_normalized_stress: Option<f64>,
    /// Leading eigenvalues of the double-centered Minimax matrix.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mm_eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elbow_dim: Option<usize>,
    pub embedding_dim: usize,
    pub gmm_reinitializations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub set: String,
    pub method: Method,
    pub stages: Vec<Stage>,
    pub k: usize,
    pub silhouette: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Scores>,
    pub curve: Vec<CurvePoint>,
    pub labeling: Labeling,
    pub seeds: BTreeMap<String, u64>,
    pub diagnostics: Diagnostics,
    /// Milliseconds per stage; only present when timing was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
    pub config: BTreeMap<String, String>,
}

impl RunReport {
    /// The `{set, method, k, RI, MI, VM, silhouette}` row.
    pub fn summary_row(&self) -> SummaryRow {
        SummaryRow {
            set: self.set.clone(),
            method: self.method,
            k: self.k,
            ri: self.scores.map(|s| s.ri),
            mi: self.scores.map(|s| s.mi),
            vm: self.scores.map(|s| s.vm),
            silhouette: self.silhouette,
        }
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub set: String,
    pub method: Method,
    pub k: usize,
    #[serde(rename = "RI")]
    pub ri: Option<f64>,
    #[serde(rename = "MI")]
    pub mi: Option<f64>,
    #[serde(rename = "VM")]
    pub vm: Option<f64>,
    pub silhouette: f64,
}

/// Appends one JSON line per report.
pub fn append_jsonl(reports: &[RunReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::file(path, e))?;
    for r in reports {
        writeln!(f, "{}", r.to_json_line()?).map_err(|e| Error::file(path, e))?;
    }
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.3}"))
}

/// Fixed-width table with one row per report.
pub fn render_table(reports: &[RunReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:<6} {:>3} {:>7} {:>7} {:>7} {:>7}",
        "set", "method", "k", "RI", "MI", "VM", "SS"
    );
    for r in reports {
        let row = r.summary_row();
        let _ = writeln!(
            out,
            "{:<8} {:<6} {:>3} {:>7} {:>7} {:>7} {:>7.3}",
            row.set,
            row.method.as_str(),
            row.k,
            cell(row.ri),
            cell(row.mi),
            cell(row.vm),
            row.silhouette
        );
    }
    out
}

pub const CURVE_METRICS: [&str; 4] = ["silhouette", "RI", "MI", "VM"];

/// Value of `metric` (one of [`CURVE_METRICS`]) at a curve point.
pub fn curve_value(p: &CurvePoint, metric: &str) -> Option<f64> {
    match metric {
        "silhouette" => Some(p.silhouette),
        "RI" => p.scores.map(|s| s.ri),
        "MI" => p.scores.map(|s| s.mi),
        "VM" => p.scores.map(|s| s.vm),
        _ => None,
    }
}

/// Per-`k` curves as long-format CSV `method,metric,k,value`; metrics
/// without truth labels are omitted.
pub fn curves_csv(reports: &[RunReport]) -> String {
    let mut out = String::from("method,metric,k,value\n");
    for r in reports {
        for metric in CURVE_METRICS {
            for p in &r.curve {
                if let Some(v) = curve_value(p, metric) {
                    let _ = writeln!(out, "{},{metric},{},{v}", r.method.as_str(), p.k);
                }
            }
        }
    }
    out
}
