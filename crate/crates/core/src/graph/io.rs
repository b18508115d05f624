//! The plain-text dataset directory.
//!
//! ```text
//! header.json    {"num_nodes": N, "feature_dim": F, "num_classes": C, "num_directed_edges": E}
//! edges.tsv      src<TAB>dst, sorted by (src, dst)
//! features.tsv   node<TAB>feature<TAB>value, sorted by (node, feature)
//! labels.tsv     node<TAB>class, one line per node
//! splits.json    {"train": [...], "val": [...], "test": [...]}
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{CitationGraph, GraphError, Result, Splits};
use crate::sparse::SparseMatrix;

pub const FILE_NAMES: [&str; 5] = ["header.json", "edges.tsv", "features.tsv", "labels.tsv", "splits.json"];

#[derive(Debug, Deserialize)]
struct Header {
    num_nodes: usize,
    feature_dim: usize,
    num_classes: usize,
    num_directed_edges: usize,
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|source| GraphError::Io { path, source })
}

fn parse_err(file: &'static str, line: usize, reason: impl Into<String>) -> GraphError {
    GraphError::Parse {
        file,
        line,
        reason: reason.into(),
    }
}

/// Splits each non-empty line on tabs into exactly `N` fields.
fn rows<'a, const N: usize>(
    file: &'static str,
    text: &'a str,
) -> impl Iterator<Item = Result<(usize, [&'a str; N])>> + 'a {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(move |(i, l)| {
            let fields: Vec<&str> = l.split('\t').map(str::trim).collect();
            let arr: [&str; N] = fields
                .try_into()
                .map_err(|f: Vec<&str>| parse_err(file, i + 1, format!("expected {N} fields, got {}", f.len())))?;
            Ok((i + 1, arr))
        })
}

fn int(file: &'static str, line: usize, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(file, line, format!("not a node/index: {s:?}")))
}

/// Reads and validates a dataset directory. Beyond [`CitationGraph::new`],
/// counts must match the header and every edge must have its reverse.
pub fn load(dir: impl AsRef<Path>) -> Result<CitationGraph> {
    let dir = dir.as_ref();
    let header: Header = serde_json::from_str(&read(dir, "header.json")?)
        .map_err(|e| parse_err("header.json", e.line(), e.to_string()))?;
    let n = header.num_nodes;

    let edges_text = read(dir, "edges.tsv")?;
    let mut edges = Vec::new();
    for row in rows::<2>("edges.tsv", &edges_text) {
        let (line, [s, d]) = row?;
        let (src, dst) = (int("edges.tsv", line, s)?, int("edges.tsv", line, d)?);
        if src >= n || dst >= n {
            return Err(GraphError::EdgeOutOfBounds { src, dst, num_nodes: n });
        }
        edges.push((src, dst));
    }
    if edges.len() != header.num_directed_edges {
        return Err(GraphError::CountMismatch {
            what: "directed edges",
            declared: header.num_directed_edges,
            found: edges.len(),
        });
    }

    let features_text = read(dir, "features.tsv")?;
    let mut entries = Vec::new();
    for row in rows::<3>("features.tsv", &features_text) {
        let (line, [node, feat, value]) = row?;
        let value: f64 = value
            .parse()
            .map_err(|_| parse_err("features.tsv", line, format!("not a number: {value:?}")))?;
        entries.push((
            int("features.tsv", line, node)?,
            int("features.tsv", line, feat)?,
            value,
        ));
    }
    let features = SparseMatrix::new(n, header.feature_dim, entries)?;

    let labels_text = read(dir, "labels.tsv")?;
    let mut labels = vec![None; n];
    let mut label_lines = 0;
    for row in rows::<2>("labels.tsv", &labels_text) {
        let (line, [node, class]) = row?;
        let node = int("labels.tsv", line, node)?;
        let class = int("labels.tsv", line, class)?;
        let slot = labels
            .get_mut(node)
            .ok_or_else(|| parse_err("labels.tsv", line, format!("node {node} outside 0..{n}")))?;
        if slot.replace(class).is_some() {
            return Err(parse_err("labels.tsv", line, format!("node {node} labeled twice")));
        }
        label_lines += 1;
    }
    if label_lines != n {
        return Err(GraphError::CountMismatch {
            what: "labels",
            declared: n,
            found: label_lines,
        });
    }
    let labels: Vec<usize> = labels.into_iter().map(|l| l.expect("all labeled")).collect();

    let splits: Splits = serde_json::from_str(&read(dir, "splits.json")?)
        .map_err(|e| parse_err("splits.json", e.line(), e.to_string()))?;

    let g = CitationGraph::new(header.num_classes, edges, features, labels, splits)?;
    if let Some((src, dst)) = g.asymmetric_edge() {
        return Err(GraphError::Asymmetric { src, dst });
    }
    Ok(g)
}

fn json_list(ids: &[usize]) -> String {
    let items: Vec<String> = ids.iter().map(usize::to_string).collect();
    format!("[{}]", items.join(", "))
}

/// Writes the canonical serialization: JSON with `", "` and `": "`
/// separators and a trailing newline, TSV lines sorted, real values in
/// shortest round-trip form.
pub fn save(g: &CitationGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| GraphError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let header = format!(
        "{{\"num_nodes\": {}, \"feature_dim\": {}, \"num_classes\": {}, \"num_directed_edges\": {}}}\n",
        g.num_nodes(),
        g.feature_dim(),
        g.num_classes(),
        g.edges().len()
    );
    let mut edges = String::new();
    for (s, d) in g.edges() {
        let _ = writeln!(edges, "{s}\t{d}");
    }
    let mut features = String::new();
    for (r, c, v) in g.features().entries() {
        let _ = writeln!(features, "{r}\t{c}\t{v:?}");
    }
    let mut labels = String::new();
    for (v, l) in g.labels().iter().enumerate() {
        let _ = writeln!(labels, "{v}\t{l}");
    }
    let sp = g.splits();
    let splits = format!(
        "{{\"train\": {}, \"val\": {}, \"test\": {}}}\n",
        json_list(&sp.train),
        json_list(&sp.val),
        json_list(&sp.test)
    );
    for (name, body) in FILE_NAMES.iter().zip([header, edges, features, labels, splits]) {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| GraphError::Io { path, source })?;
    }
    Ok(())
}
