//! Text formats: edge lists, feature CSVs, label CSVs and numeric matrix
//! export.
//!
//! * edges: `src<TAB>dst<TAB>weight` per line, `#` starts a comment, each
//!   undirected edge listed once;
//! * features: one CSV row of reals per vertex, no header;
//! * labels: first line `K=<int>`, then `vertex,label` lines; vertices not
//!   listed are unlabelled.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numeric::fmt12;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Strips a `#` comment and surrounding whitespace.
fn content(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

/// Reads a graph from an edge list, a feature CSV and an optional label CSV.
/// The vertex count is the number of feature rows.
pub fn load_graph(edge_path: &Path, feature_path: &Path, label_path: Option<&Path>) -> Result<Graph> {
    let features = parse_features(&read(feature_path)?, feature_path)?;
    let n = features.rows();
    let edges = parse_edges(&read(edge_path)?, edge_path, n)?;
    let (labels, k) = match label_path {
        Some(p) => parse_labels(&read(p)?, p, n)?,
        None => (vec![None; n], 0),
    };
    Graph::new(features, &edges, labels, k)
}

pub fn parse_features(text: &str, path: &Path) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut width = 0;
        for field in line.split(',') {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(path, ln + 1, format!("`{}` is not a number", field.trim())))?;
            if !x.is_finite() {
                return Err(parse_err(path, ln + 1, "non-finite feature value"));
            }
            data.push(x);
            width += 1;
        }
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(parse_err(path, ln + 1, format!("{width} columns, expected {c}")));
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(path, 1, "feature file has no rows"))?;
    Tensor::from_vec(rows, cols, data)
}

pub fn parse_edges(text: &str, path: &Path, n: usize) -> Result<Vec<(usize, usize, f64)>> {
    let mut edges = Vec::new();
    let mut seen: HashMap<(usize, usize), (usize, f64)> = HashMap::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = content(line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(path, ln, format!("expected `src dst weight`, got {} fields", fields.len())));
        }
        let vertex = |s: &str| -> Result<usize> {
            let v: usize = s
                .parse()
                .map_err(|_| parse_err(path, ln, format!("`{s}` is not a vertex index")))?;
            if v >= n {
                return Err(parse_err(path, ln, format!("vertex {v} outside 0..{n} (feature rows)")));
            }
            Ok(v)
        };
        let (i, j) = (vertex(fields[0])?, vertex(fields[1])?);
        let w: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(path, ln, format!("`{}` is not a weight", fields[2])))?;
        if i == j {
            return Err(parse_err(path, ln, format!("self-loop on vertex {i}")));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(parse_err(path, ln, format!("weight {w} must be finite and positive")));
        }
        let key = (i.min(j), i.max(j));
        if let Some(&(first, w0)) = seen.get(&key) {
            let msg = if w0 == w {
                format!("duplicate edge ({}, {}), first on line {first}", key.0, key.1)
            } else {
                format!(
                    "duplicate edge ({}, {}) with asymmetric weights {w0} (line {first}) and {w}",
                    key.0, key.1
                )
            };
            return Err(parse_err(path, ln, msg));
        }
        seen.insert(key, (ln, w));
        edges.push((i, j, w));
    }
    Ok(edges)
}

pub fn parse_labels(text: &str, path: &Path, n: usize) -> Result<(Vec<Option<usize>>, usize)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(ln, l)| (ln + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (ln, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "label file is empty; expected `K=<int>`"))?;
    let k: usize = header
        .strip_prefix("K=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| parse_err(path, ln, format!("expected `K=<int>`, got `{header}`")))?;
    let mut labels = vec![None; n];
    for (ln, line) in lines {
        let (v, l) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, ln, "expected `vertex,label`"))?;
        let v: usize = v
            .trim()
            .parse()
            .map_err(|_| parse_err(path, ln, format!("`{}` is not a vertex index", v.trim())))?;
        let l: usize = l
            .trim()
            .parse()
            .map_err(|_| parse_err(path, ln, format!("`{}` is not a class index", l.trim())))?;
        if v >= n {
            return Err(parse_err(path, ln, format!("vertex {v} outside 0..{n}")));
        }
        if l >= k {
            return Err(parse_err(path, ln, format!("label {l} not below declared K={k}")));
        }
        if labels[v].replace(l).is_some() {
            return Err(parse_err(path, ln, format!("vertex {v} labelled twice")));
        }
    }
    Ok((labels, k))
}

/// Edge list text. Weights use the shortest round-trip representation, so
/// reading the output back reproduces the graph exactly.
pub fn edges_to_string(g: &Graph) -> String {
    let mut s = String::new();
    for (i, j, w) in g.edges() {
        let _ = writeln!(s, "{i}\t{j}\t{w:?}");
    }
    s
}

pub fn features_to_string(x: &Tensor) -> String {
    let mut s = String::new();
    for r in 0..x.rows() {
        let row: Vec<String> = x.row(r).iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn labels_to_string(g: &Graph) -> String {
    let mut s = format!("K={}\n", g.n_classes());
    for (v, l) in g.labels().iter().enumerate() {
        if let Some(l) = l {
            let _ = writeln!(s, "{v},{l}");
        }
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the three graph files; the label file only when `label_path` is
/// given.
pub fn save_graph(g: &Graph, edge_path: &Path, feature_path: &Path, label_path: Option<&Path>) -> Result<()> {
    write(edge_path, &edges_to_string(g))?;
    write(feature_path, &features_to_string(g.features()))?;
    if let Some(p) = label_path {
        write(p, &labels_to_string(g))?;
    }
    Ok(())
}

/// Headerless CSV of a matrix, 12 significant digits.
pub fn matrix_csv(x: &Tensor) -> String {
    let mut s = String::new();
    for r in 0..x.rows() {
        let row: Vec<String> = x.row(r).iter().map(|&v| fmt12(v)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write(path, text)
}
