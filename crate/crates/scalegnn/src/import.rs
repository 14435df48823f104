//! CSV import into a bundle.
//!
//! - edges: one `src,dst` pair of 0-based node ids per line;
//! - features: one comma-separated row of floats per node, in node order;
//! - labels: one class id per line, in node order;
//! - splits: one of `train`, `val`, `test` or `none` per line, in node order.
//!
//! A first line that does not parse is treated as a header and skipped.
//! Edges are symmetrized unless told otherwise.

use std::path::Path;

use scalegnn_core::{DataSplit, Dataset, Graph, LabelVector, Matrix};

use crate::error::{Error, Result};

fn records(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format_err(path, e))?;
    let mut out = Vec::new();
    for r in reader.records() {
        let r = r.map_err(|e| format_err(path, e))?;
        if r.iter().all(str::is_empty) {
            continue;
        }
        out.push(r.iter().map(String::from).collect());
    }
    Ok(out)
}

fn format_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Parses every row with `f`, skipping a failing first row as a header.
fn parse_rows<T>(path: &Path, mut f: impl FnMut(&[String]) -> Option<T>) -> Result<Vec<T>> {
    let rows = records(path)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        match f(r) {
            Some(v) => out.push(v),
            None if i == 0 => {}
            None => return Err(format_err(path, format!("line {}: cannot parse {:?}", i + 1, r.join(",")))),
        }
    }
    Ok(out)
}

pub struct CsvSources<'a> {
    pub edges: &'a Path,
    pub features: &'a Path,
    pub labels: &'a Path,
    pub splits: &'a Path,
    pub symmetrize: bool,
}

pub fn import_csv(src: &CsvSources) -> Result<Dataset> {
    let features = parse_rows(src.features, |r| r.iter().map(|x| x.parse::<f64>().ok()).collect::<Option<Vec<_>>>())?;
    let n = features.len();
    let d = features.first().map_or(0, Vec::len);
    if let Some(i) = features.iter().position(|r| r.len() != d) {
        return Err(format_err(src.features, format!("row {i} has {} values, expected {d}", features[i].len())));
    }
    let features = Matrix::new(n, d, features.concat())?;

    let edges = parse_rows(src.edges, |r| match r {
        [u, v] => Some((u.parse().ok()?, v.parse().ok()?)),
        _ => None,
    })?;
    let graph = Graph::from_edges(&edges, n, src.symmetrize)?;

    let labels: Vec<usize> = parse_rows(src.labels, |r| r.first()?.parse().ok())?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let labels = LabelVector::new(labels, classes)?;

    let tags = parse_rows(src.splits, |r| match r.first()?.as_str() {
        t @ ("train" | "val" | "test" | "none") => Some(t.to_string()),
        _ => None,
    })?;
    let mut split = DataSplit::default();
    for (v, t) in tags.iter().enumerate() {
        match t.as_str() {
            "train" => split.train.push(v),
            "val" => split.val.push(v),
            "test" => split.test.push(v),
            _ => {}
        }
    }
    Ok(Dataset::new(graph, features, labels, split)?)
}
