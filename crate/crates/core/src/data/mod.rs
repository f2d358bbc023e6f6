//! Datasets on disk and in memory.
//!
//! A dataset directory holds four plain-text files:
//!
//! | file           | contents                                                 |
//! |----------------|----------------------------------------------------------|
//! | `graph.txt`    | header `n m`, then `m` lines `u v` (undirected edges)     |
//! | `features.txt` | header `n d`, then `n` rows of `d` whitespace-separated reals |
//! | `labels.txt`   | `n` lines, one class id each                             |
//! | `splits.txt`   | three lines: train, validation and test node ids         |

mod stats;
mod synthetic;

pub use stats::{degree_stats, expected_union_size, union_size_estimate, DegreeStats};
pub use synthetic::{FeatureKind, Generator, LabelRule, SplitRule, SyntheticSpec};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use thiserror::Error;

use crate::graph::{GraphError, SparseGraph};

pub const GRAPH_FILE: &str = "graph.txt";
pub const FEATURES_FILE: &str = "features.txt";
pub const LABELS_FILE: &str = "labels.txt";
pub const SPLITS_FILE: &str = "splits.txt";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed header: {message}")]
    Header {
        file: &'static str,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: &'static str,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: index {index} out of range for {num_nodes} nodes")]
    IndexOutOfRange {
        file: &'static str,
        line: usize,
        index: usize,
        num_nodes: usize,
    },
    #[error("{file}:{line}: node {node} already appears in an earlier split")]
    SplitOverlap {
        file: &'static str,
        line: usize,
        node: usize,
    },
    #[error("{file}: expected {expected} {what}, found {found}")]
    Count {
        file: &'static str,
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Train / validation / test node ids, each sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn all(&self) -> [&[usize]; 3] {
        [&self.train, &self.val, &self.test]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: SparseGraph,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub splits: Splits,
}

impl Dataset {
    /// Checks sizes, label range and that the splits are valid and disjoint.
    pub fn new(
        graph: SparseGraph,
        features: Array2<f64>,
        labels: Vec<usize>,
        splits: Splits,
    ) -> Result<Self, DataError> {
        let n = graph.num_nodes();
        if features.nrows() != n {
            return Err(DataError::Invalid(format!(
                "{} feature rows for {n} nodes",
                features.nrows()
            )));
        }
        if labels.len() != n {
            return Err(DataError::Invalid(format!("{} labels for {n} nodes", labels.len())));
        }
        let mut seen = vec![false; n];
        for (k, split) in splits.all().into_iter().enumerate() {
            for &v in split {
                if v >= n {
                    return Err(DataError::Invalid(format!("split {k} contains node {v} >= {n}")));
                }
                if std::mem::replace(&mut seen[v], true) {
                    return Err(DataError::Invalid(format!("node {v} appears in two splits")));
                }
            }
        }
        let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
        let mut splits = splits;
        splits.train.sort_unstable();
        splits.val.sort_unstable();
        splits.test.sort_unstable();
        Ok(Self {
            graph,
            features,
            labels,
            num_classes,
            splits,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels_of(&self, nodes: &[usize]) -> Vec<usize> {
        nodes.iter().map(|&v| self.labels[v]).collect()
    }
}

/// Scales every row with nonzero absolute sum to unit L1 norm.
pub fn l1_normalize_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let sum: f64 = row.iter().map(|v| v.abs()).sum();
        if sum > 0.0 {
            row.mapv_inplace(|v| v / sum);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub normalize_features: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            normalize_features: true,
        }
    }
}

/// Loads a dataset directory with L1 row-normalized features.
pub fn load_dataset(dir: &Path) -> Result<Dataset, DataError> {
    load_dataset_with(dir, LoadOptions::default())
}

pub fn load_dataset_with(dir: &Path, opts: LoadOptions) -> Result<Dataset, DataError> {
    let graph = parse_graph(&read(dir, GRAPH_FILE)?)?;
    let n = graph.num_nodes();
    let mut features = parse_features(&read(dir, FEATURES_FILE)?, n)?;
    let labels = parse_labels(&read(dir, LABELS_FILE)?, n)?;
    let splits = parse_splits(&read(dir, SPLITS_FILE)?, n)?;
    if opts.normalize_features {
        l1_normalize_rows(&mut features);
    }
    Dataset::new(graph, features, labels, splits)
}

/// Writes the four files in canonical form: edges as `u v` with `u < v` in
/// row-major order, reals in shortest round-trip notation.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_file(dir, GRAPH_FILE, |w| {
        writeln!(w, "{} {}", ds.graph.num_nodes(), ds.graph.num_edges())?;
        for (u, v) in ds.graph.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    })?;
    write_file(dir, FEATURES_FILE, |w| {
        writeln!(w, "{} {}", ds.features.nrows(), ds.features.ncols())?;
        for row in ds.features.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    w.write_all(b" ")?;
                }
                write!(w, "{v}")?;
                first = false;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    write_file(dir, LABELS_FILE, |w| {
        for y in &ds.labels {
            writeln!(w, "{y}")?;
        }
        Ok(())
    })?;
    write_file(dir, SPLITS_FILE, |w| {
        for split in ds.splits.all() {
            let line: Vec<String> = split.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    })
}

fn read(dir: &Path, file: &str) -> Result<String, DataError> {
    let path = dir.join(file);
    fs::read_to_string(&path).map_err(|source| DataError::Io { path, source })
}

fn write_file(
    dir: &Path,
    file: &str,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<(), DataError> {
    let path = dir.join(file);
    let wrap = |source| DataError::Io {
        path: path.clone(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(&path).map_err(wrap)?);
    body(&mut w).map_err(wrap)?;
    w.flush().map_err(wrap)
}

/// Nonblank lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_header<'a>(
    file: &'static str,
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<(usize, usize), DataError> {
    let (line, text) = lines.next().ok_or(DataError::Header {
        file,
        line: 1,
        message: "missing header".into(),
    })?;
    let fields: Vec<&str> = text.split_whitespace().collect();
    let bad = |message: String| DataError::Header { file, line, message };
    if fields.len() != 2 {
        return Err(bad(format!("expected two integers, found {text:?}")));
    }
    let a = fields[0]
        .parse()
        .map_err(|_| bad(format!("bad integer {:?}", fields[0])))?;
    let b = fields[1]
        .parse()
        .map_err(|_| bad(format!("bad integer {:?}", fields[1])))?;
    Ok((a, b))
}

fn parse_index(file: &'static str, line: usize, token: &str, n: usize) -> Result<usize, DataError> {
    let index: usize = token.parse().map_err(|_| DataError::Parse {
        file,
        line,
        message: format!("bad node index {token:?}"),
    })?;
    if index >= n {
        return Err(DataError::IndexOutOfRange {
            file,
            line,
            index,
            num_nodes: n,
        });
    }
    Ok(index)
}

fn parse_graph(text: &str) -> Result<SparseGraph, DataError> {
    let mut lines = content_lines(text);
    let (n, m) = parse_header(GRAPH_FILE, &mut lines)?;
    let mut edges = Vec::with_capacity(m);
    for (line, body) in lines {
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(DataError::Parse {
                file: GRAPH_FILE,
                line,
                message: format!("expected `u v`, found {body:?}"),
            });
        }
        let u = parse_index(GRAPH_FILE, line, fields[0], n)?;
        let v = parse_index(GRAPH_FILE, line, fields[1], n)?;
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(DataError::Count {
            file: GRAPH_FILE,
            what: "edge lines",
            expected: m,
            found: edges.len(),
        });
    }
    Ok(SparseGraph::from_edges(n, &edges)?)
}

fn parse_features(text: &str, n: usize) -> Result<Array2<f64>, DataError> {
    let mut lines = content_lines(text);
    let (rows, d) = parse_header(FEATURES_FILE, &mut lines)?;
    if rows != n {
        return Err(DataError::Header {
            file: FEATURES_FILE,
            line: 1,
            message: format!("{rows} rows declared but the graph has {n} nodes"),
        });
    }
    let mut data = Vec::with_capacity(n * d);
    let mut count = 0;
    for (line, body) in lines {
        let before = data.len();
        for token in body.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| DataError::Parse {
                file: FEATURES_FILE,
                line,
                message: format!("bad real {token:?}"),
            })?;
            data.push(v);
        }
        if data.len() - before != d {
            return Err(DataError::Parse {
                file: FEATURES_FILE,
                line,
                message: format!("expected {d} values, found {}", data.len() - before),
            });
        }
        count += 1;
    }
    if count != n {
        return Err(DataError::Count {
            file: FEATURES_FILE,
            what: "feature rows",
            expected: n,
            found: count,
        });
    }
    Ok(Array2::from_shape_vec((n, d), data).expect("sizes checked"))
}

fn parse_labels(text: &str, n: usize) -> Result<Vec<usize>, DataError> {
    let labels = content_lines(text)
        .map(|(line, body)| {
            body.parse().map_err(|_| DataError::Parse {
                file: LABELS_FILE,
                line,
                message: format!("bad class id {body:?}"),
            })
        })
        .collect::<Result<Vec<usize>, _>>()?;
    if labels.len() != n {
        return Err(DataError::Count {
            file: LABELS_FILE,
            what: "labels",
            expected: n,
            found: labels.len(),
        });
    }
    Ok(labels)
}

fn parse_splits(text: &str, n: usize) -> Result<Splits, DataError> {
    // Empty splits are written as blank lines, so lines are not filtered here.
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != 3 {
        return Err(DataError::Count {
            file: SPLITS_FILE,
            what: "lines",
            expected: 3,
            found: lines.len(),
        });
    }
    let mut seen = vec![false; n];
    let mut parsed = Vec::with_capacity(3);
    for (k, body) in lines.iter().enumerate() {
        let line = k + 1;
        let mut ids = Vec::new();
        for token in body.split_whitespace() {
            let v = parse_index(SPLITS_FILE, line, token, n)?;
            if std::mem::replace(&mut seen[v], true) {
                return Err(DataError::SplitOverlap {
                    file: SPLITS_FILE,
                    line,
                    node: v,
                });
            }
            ids.push(v);
        }
        parsed.push(ids);
    }
    let test = parsed.pop().expect("three lines");
    let val = parsed.pop().expect("three lines");
    let train = parsed.pop().expect("three lines");
    Ok(Splits { train, val, test })
}
