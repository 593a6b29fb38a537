//! File formats.
//!
//! * Trajectories: JSON Lines. An optional first line carries the header
//!   `{"format":"dtmm-trajectories","version":1,"point_order":["lateral","longitudinal"],...}`;
//!   every other line is one record
//!   `{"id": string, "label": string|null, "hz": int, "points": [[lat, lon], ...]}`.
//! * Matrices: headerless CSV, one line per row, shortest round-trip decimals.
//! * Labelings: JSON `{"k": int, "labels": [int, ...], "method": string, "seed": int}`
//!   plus an optional `"ids"` array used to join against a dataset.
//! * Embeddings: CSV with header `id,x1,...,xd`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{
    Embedding, Labeling, Point2, SymMatrix, Trajectory, TrajectorySet, DEFAULT_SAMPLE_RATE_HZ,
};

pub const TRAJECTORY_FORMAT: &str = "dtmm-trajectories";
pub const POINT_ORDER: [&str; 2] = ["lateral", "longitudinal"];

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    point_order: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    provenance: BTreeMap<String, String>,
}

fn default_hz() -> u32 {
    DEFAULT_SAMPLE_RATE_HZ
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default = "default_hz")]
    hz: u32,
    points: Vec<Point2>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses trajectories from JSON Lines text.
pub fn parse_trajectories(reader: impl BufRead) -> Result<TrajectorySet> {
    let mut trajectories = Vec::new();
    let mut provenance = BTreeMap::new();
    let mut first_content = true;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| parse_error(line_no, e.to_string()))?;
        if first_content && value.get("point_order").is_some() {
            first_content = false;
            let header: Header =
                serde_json::from_value(value).map_err(|e| parse_error(line_no, e.to_string()))?;
            if header.point_order != POINT_ORDER {
                return Err(parse_error(
                    line_no,
                    format!("unsupported point order {:?}", header.point_order),
                ));
            }
            provenance = header.provenance;
            continue;
        }
        first_content = false;
        let record: Record =
            serde_json::from_value(value).map_err(|e| parse_error(line_no, e.to_string()))?;
        let t = Trajectory::new(record.id, record.points, record.hz, record.label)
            .map_err(|e| parse_error(line_no, e.to_string()))?;
        trajectories.push(t);
    }
    if trajectories.is_empty() {
        return Err(Error::EmptyInput("no trajectory records".into()));
    }
    TrajectorySet::with_provenance(trajectories, provenance)
}

pub fn load_trajectories(path: impl AsRef<Path>) -> Result<TrajectorySet> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    parse_trajectories(BufReader::new(file))
}

/// Writes the canonical JSONL form (header line, then one record per line).
pub fn write_trajectories(set: &TrajectorySet, mut w: impl Write) -> Result<()> {
    let header = Header {
        format: TRAJECTORY_FORMAT.into(),
        version: 1,
        point_order: POINT_ORDER.iter().map(|s| (*s).to_owned()).collect(),
        provenance: set.provenance().clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for t in set.trajectories() {
        let record = Record {
            id: t.id().to_owned(),
            label: t.truth_label().map(str::to_owned),
            hz: t.sample_rate_hz(),
            points: t.points().to_vec(),
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_trajectories(set: &TrajectorySet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    write_trajectories(set, &mut w)?;
    w.flush().map_err(|e| Error::file(path, e))
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    if v == 0.0 {
        "0".to_owned()
    } else if (1e-5..1e16).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_matrix(m: &SymMatrix, mut w: impl Write) -> Result<()> {
    let n = m.order();
    let mut line = String::new();
    for i in 0..n {
        line.clear();
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format_f64(*v));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn save_matrix(m: &SymMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    write_matrix(m, &mut w)?;
    w.flush().map_err(|e| Error::file(path, e))
}

pub fn parse_matrix(reader: impl BufRead) -> Result<SymMatrix> {
    let mut data = Vec::new();
    let mut rows = 0usize;
    let mut width = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_error(idx + 1, e.to_string()))?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_error(idx + 1, format!("expected {w} columns, got {}", row.len())))
            }
            _ => {}
        }
        data.extend(row);
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyInput("empty matrix file".into()));
    }
    SymMatrix::new(rows, data)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<SymMatrix> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    parse_matrix(BufReader::new(file))
}

/// On-disk labeling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelingFile {
    pub k: usize,
    pub labels: Vec<usize>,
    pub method: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<String>>,
}

impl LabelingFile {
    pub fn labeling(&self) -> Result<Labeling> {
        if let Some(ids) = &self.ids {
            if ids.len() != self.labels.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.labels.len(),
                    actual: ids.len(),
                });
            }
        }
        Labeling::new(self.labels.clone(), self.k)
    }
}

pub fn save_labeling(file: &LabelingFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string(file)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

pub fn load_labeling(path: impl AsRef<Path>) -> Result<LabelingFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let file: LabelingFile = serde_json::from_str(&text)?;
    file.labeling()?;
    Ok(file)
}

pub fn embedding_csv<'a>(e: &Embedding, ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::from("id");
    for c in 1..=e.dim() {
        let _ = write!(out, ",x{c}");
    }
    out.push('\n');
    for (i, id) in ids.into_iter().enumerate().take(e.rows()) {
        out.push_str(id);
        for v in e.row(i) {
            out.push(',');
            out.push_str(&format_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn save_embedding<'a>(
    e: &Embedding,
    ids: impl IntoIterator<Item = &'a str>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, embedding_csv(e, ids)).map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const THREE: &str = concat!(
        r#"{"id":"a","label":"cut_in","hz":10,"points":[[3.5,-10.0],[0.0,5.0]]}"#,
        "\n",
        r#"{"id":"b","label":null,"hz":10,"points":[[1.0,2.0]]}"#,
        "\n",
        r#"{"id":"c","label":"drive_by_left","hz":10,"points":[[3.5,0.25]]}"#,
        "\n"
    );

    #[test]
    fn loads_three_records_in_order() {
        let set = parse_trajectories(Cursor::new(THREE)).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.ids().collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!(set.trajectories()[0].points()[0], Point2::new(3.5, -10.0));
        assert_eq!(set.trajectories()[1].truth_label(), None);
    }

    #[test]
    fn empty_trajectory_reports_line() {
        let text = format!("{THREE}{}\n", r#"{"id":"d","label":null,"hz":10,"points":[]}"#);
        let err = parse_trajectories(Cursor::new(text)).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("empty trajectory"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_and_duplicates_and_empty_file() {
        let bad = "{\"id\":\"a\",\"points\":[[0,0]]}\nnot json\n";
        assert!(matches!(
            parse_trajectories(Cursor::new(bad)),
            Err(Error::Parse { line: 2, .. })
        ));
        let dup = "{\"id\":\"a\",\"points\":[[0,0]]}\n{\"id\":\"a\",\"points\":[[0,1]]}\n";
        assert!(matches!(parse_trajectories(Cursor::new(dup)), Err(Error::DuplicateId(_))));
        assert!(matches!(parse_trajectories(Cursor::new("\n")), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn header_point_order_enforced() {
        let text = "{\"format\":\"dtmm-trajectories\",\"version\":1,\"point_order\":[\"longitudinal\",\"lateral\"]}\n{\"id\":\"a\",\"points\":[[0,0]]}\n";
        assert!(matches!(
            parse_trajectories(Cursor::new(text)),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn canonical_text_round_trips_byte_identically() {
        let set = parse_trajectories(Cursor::new(THREE)).unwrap();
        let mut first = Vec::new();
        write_trajectories(&set, &mut first).unwrap();
        let again = parse_trajectories(Cursor::new(first.clone())).unwrap();
        let mut second = Vec::new();
        write_trajectories(&again, &mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(set, again);
    }

    #[test]
    fn zero_matrix_csv() {
        let mut out = Vec::new();
        write_matrix(&SymMatrix::zeros(2), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "0,0\n0,0\n");
    }

    #[test]
    fn non_symmetric_matrix_rejected() {
        assert!(SymMatrix::new(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(parse_matrix(Cursor::new("0,1\n2,0\n")).is_err());
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, 1e-300, 123456789.123, 2.5e17, 1.0 / 3.0, 7.0, 9.999e-6] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn labeling_file_json_shape() {
        let f = LabelingFile {
            k: 2,
            labels: vec![0, 1, 1],
            method: "dtmm".into(),
            seed: 42,
            ids: None,
        };
        assert_eq!(
            serde_json::to_string(&f).unwrap(),
            r#"{"k":2,"labels":[0,1,1],"method":"dtmm","seed":42}"#
        );
    }
}
