//! TU-format dataset parsing and CSV export.
//!
//! The TU layout is a directory of text files sharing a dataset-name
//! prefix: `{name}_A.txt` (edge list, "i, j" pairs of 1-indexed global
//! vertex ids), `{name}_graph_indicator.txt` (line v = 1-indexed graph id
//! of global vertex v), and optional `{name}_graph_labels.txt`,
//! `{name}_node_labels.txt` and `{name}_node_attributes.txt`. Whitespace
//! around commas and blank trailing lines are tolerated; both orientations
//! of an undirected edge collapse to one.
//!
//! All exports are CSV with floats written in their shortest
//! round-trippable decimal form.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphDataset, Targets};
use crate::linalg::symmetry_error;

/// Resolved file set of a TU-format dataset directory.
#[derive(Debug, Clone)]
pub struct TuDatasetFiles {
    pub dir: PathBuf,
    pub name: String,
    pub adjacency: PathBuf,
    pub graph_indicator: PathBuf,
    pub graph_labels: Option<PathBuf>,
    pub node_labels: Option<PathBuf>,
    pub node_attributes: Option<PathBuf>,
}

impl TuDatasetFiles {
    /// Locates the mandatory and optional files of dataset `name` in `dir`.
    pub fn locate(dir: &Path, name: &str) -> Result<Self> {
        let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));
        let optional = |suffix: &str| {
            let p = file(suffix);
            p.exists().then_some(p)
        };
        let adjacency = file("A");
        if !adjacency.exists() {
            return Err(Error::MissingFile(adjacency));
        }
        let graph_indicator = file("graph_indicator");
        if !graph_indicator.exists() {
            return Err(Error::MissingFile(graph_indicator));
        }
        Ok(TuDatasetFiles {
            dir: dir.to_path_buf(),
            name: name.to_string(),
            adjacency,
            graph_indicator,
            graph_labels: optional("graph_labels"),
            node_labels: optional("node_labels"),
            node_attributes: optional("node_attributes"),
        })
    }
}

fn format_err(file: &Path, message: impl Into<String>) -> Error {
    Error::Format { file: file.to_path_buf(), message: message.into() }
}

/// Non-blank trimmed lines of a file, with 1-based line numbers.
fn data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let t = l.trim();
            (!t.is_empty()).then(|| (i + 1, t.to_string()))
        })
        .collect())
}

fn parse_int(path: &Path, line_no: usize, s: &str) -> Result<i64> {
    s.trim()
        .parse::<i64>()
        .map_err(|_| format_err(path, format!("line {line_no}: expected an integer, got '{s}'")))
}

/// Loads a TU-format dataset: edges are symmetrized and deduplicated,
/// vertices become 0-indexed with per-graph local ids in ascending global
/// order, and graph class labels are remapped to a dense `0..C` range
/// preserving sorted original order.
pub fn load_tu_dataset(dir: &Path, name: &str) -> Result<GraphDataset> {
    let files = TuDatasetFiles::locate(dir, name)?;

    // Graph membership of every global vertex.
    let indicator = data_lines(&files.graph_indicator)?;
    let total = indicator.len();
    let mut graph_of = Vec::with_capacity(total);
    let mut n_graphs = 0usize;
    for (line_no, line) in &indicator {
        let g = parse_int(&files.graph_indicator, *line_no, line)?;
        if g < 1 {
            return Err(format_err(&files.graph_indicator, format!("line {line_no}: graph id {g} < 1")));
        }
        let g = (g - 1) as usize;
        n_graphs = n_graphs.max(g + 1);
        graph_of.push(g);
    }
    if total == 0 {
        return Err(format_err(&files.graph_indicator, "no vertices"));
    }

    // Local ids in ascending global order.
    let mut sizes = vec![0usize; n_graphs];
    let mut local = Vec::with_capacity(total);
    for &g in &graph_of {
        local.push(sizes[g]);
        sizes[g] += 1;
    }

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_graphs];
    for (line_no, line) in data_lines(&files.adjacency)? {
        let mut parts = line.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (
                parse_int(&files.adjacency, line_no, a)?,
                parse_int(&files.adjacency, line_no, b)?,
            ),
            _ => return Err(format_err(&files.adjacency, format!("line {line_no}: expected 'i, j'"))),
        };
        for v in [a, b] {
            if v < 1 || v as usize > total {
                return Err(format_err(
                    &files.adjacency,
                    format!("line {line_no}: vertex id {v} outside 1..={total}"),
                ));
            }
        }
        let (a, b) = ((a - 1) as usize, (b - 1) as usize);
        if graph_of[a] != graph_of[b] {
            return Err(format_err(
                &files.adjacency,
                format!("line {line_no}: edge joins graphs {} and {}", graph_of[a] + 1, graph_of[b] + 1),
            ));
        }
        if a == b {
            return Err(format_err(&files.adjacency, format!("line {line_no}: self-loop at vertex {}", a + 1)));
        }
        edges[graph_of[a]].push((local[a], local[b]));
    }

    let node_labels: Option<Vec<i64>> = match &files.node_labels {
        Some(path) => {
            let lines = data_lines(path)?;
            if lines.len() != total {
                return Err(format_err(path, format!("{} label lines for {total} vertices", lines.len())));
            }
            Some(
                lines
                    .iter()
                    .map(|(line_no, l)| parse_int(path, *line_no, l))
                    .collect::<Result<_>>()?,
            )
        }
        None => None,
    };

    let node_attributes: Option<Vec<Vec<f64>>> = match &files.node_attributes {
        Some(path) => {
            let lines = data_lines(path)?;
            if lines.len() != total {
                return Err(format_err(path, format!("{} attribute rows for {total} vertices", lines.len())));
            }
            let mut rows = Vec::with_capacity(total);
            let mut dim = None;
            for (line_no, line) in &lines {
                let row: Vec<f64> = line
                    .split(',')
                    .map(|s| {
                        s.trim().parse::<f64>().map_err(|_| {
                            format_err(path, format!("line {line_no}: expected a real number, got '{s}'"))
                        })
                    })
                    .collect::<Result<_>>()?;
                match dim {
                    None => dim = Some(row.len()),
                    Some(d) if d != row.len() => {
                        return Err(format_err(path, format!("line {line_no}: ragged attribute row")))
                    }
                    _ => {}
                }
                rows.push(row);
            }
            Some(rows)
        }
        None => None,
    };

    let targets = match &files.graph_labels {
        Some(path) => {
            let lines = data_lines(path)?;
            if lines.len() != n_graphs {
                return Err(format_err(path, format!("{} labels for {n_graphs} graphs", lines.len())));
            }
            let raw: Vec<i64> = lines
                .iter()
                .map(|(line_no, l)| parse_int(path, *line_no, l))
                .collect::<Result<_>>()?;
            let mut original: Vec<i64> = raw.clone();
            original.sort_unstable();
            original.dedup();
            let labels = raw
                .iter()
                .map(|l| original.binary_search(l).unwrap())
                .collect();
            Targets::Classes { labels, original }
        }
        None => Targets::None,
    };

    let mut graphs = Vec::with_capacity(n_graphs);
    for g in 0..n_graphs {
        let graph = Graph::from_edges(sizes[g], &edges[g])
            .map_err(|e| format_err(&files.adjacency, format!("graph {}: {e}", g + 1)))?;
        graphs.push(graph);
    }
    if let Some(labels) = node_labels {
        let mut per_graph: Vec<Vec<i64>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (v, &l) in labels.iter().enumerate() {
            per_graph[graph_of[v]].push(l);
        }
        graphs = graphs
            .into_iter()
            .zip(per_graph)
            .map(|(g, ls)| g.with_labels(ls))
            .collect::<Result<_>>()?;
    }
    if let Some(attrs) = node_attributes {
        let mut per_graph: Vec<Vec<Vec<f64>>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (v, row) in attrs.into_iter().enumerate() {
            per_graph[graph_of[v]].push(row);
        }
        graphs = graphs
            .into_iter()
            .zip(per_graph)
            .map(|(g, at)| g.with_attributes(at))
            .collect::<Result<_>>()?;
    }
    GraphDataset::new(graphs, targets)
}

/// Writes a dataset in TU format (supports loader round-trip tests and
/// exporting synthetic data). Emits both orientations of every edge.
pub fn write_tu_dataset(ds: &GraphDataset, dir: &Path, name: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));
    let mut a = BufWriter::new(fs::File::create(file("A"))?);
    let mut indicator = BufWriter::new(fs::File::create(file("graph_indicator"))?);
    for g in 0..ds.n_graphs() {
        let offset = ds.vertex_range(g).start;
        let graph = ds.graph(g);
        for v in 0..graph.n_vertices() {
            writeln!(indicator, "{}", g + 1)?;
            for &u in graph.neighbors(v) {
                writeln!(a, "{}, {}", offset + v + 1, offset + u as usize + 1)?;
            }
        }
    }
    a.flush()?;
    indicator.flush()?;
    if ds.has_labels() {
        let mut w = BufWriter::new(fs::File::create(file("node_labels"))?);
        for v in 0..ds.total_vertices() {
            writeln!(w, "{}", ds.vertex_label(v).unwrap())?;
        }
        w.flush()?;
    }
    if ds.has_attributes() {
        let mut w = BufWriter::new(fs::File::create(file("node_attributes"))?);
        for v in 0..ds.total_vertices() {
            let row = ds.vertex_attribute(v).unwrap();
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", cells.join(", "))?;
        }
        w.flush()?;
    }
    if let Targets::Classes { labels, original } = ds.targets() {
        let mut w = BufWriter::new(fs::File::create(file("graph_labels"))?);
        for &l in labels {
            writeln!(w, "{}", original[l])?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Writes a symmetric kernel matrix as CSV: a header row of ids, then one
/// row per graph (id followed by the kernel values).
pub fn write_gram(values: &Array2<f64>, ids: &[String], path: &Path) -> Result<()> {
    let n = values.nrows();
    if values.ncols() != n {
        return Err(Error::Contract("gram matrix must be square".into()));
    }
    if ids.len() != n {
        return Err(Error::Contract(format!("{} ids for a {n}x{n} matrix", ids.len())));
    }
    let scale = values.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
    if symmetry_error(&values.view()) > 1e-9 * scale {
        return Err(Error::Contract("refusing to write an asymmetric gram matrix".into()));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", ids.join(","))?;
    for i in 0..n {
        write!(w, "{}", ids[i])?;
        for j in 0..n {
            write!(w, ",{}", values[[i, j]])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a gram CSV written by [`write_gram`].
pub fn read_gram(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| format_err(path, "empty file"))?;
    let ids: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let n = ids.len();
    let mut values = Array2::zeros((n, n));
    for (i, line) in lines.enumerate() {
        let mut parts = line.split(',');
        let row_id = parts.next().unwrap_or_default().trim();
        if row_id != ids[i] {
            return Err(format_err(path, format!("row {i} id '{row_id}' does not match header '{}'", ids[i])));
        }
        for j in 0..n {
            let cell = parts
                .next()
                .ok_or_else(|| format_err(path, format!("row {i} has fewer than {n} values")))?;
            values[[i, j]] = cell
                .trim()
                .parse::<f64>()
                .map_err(|_| format_err(path, format!("row {i} column {j}: bad number '{cell}'")))?;
        }
    }
    Ok((ids, values))
}

/// Writes per-graph feature rows as CSV: graph id, target value(s) when
/// present, then the feature values.
pub fn write_features(features: &Array2<f64>, ids: &[String], targets: &Targets, path: &Path) -> Result<()> {
    if ids.len() != features.nrows() {
        return Err(Error::Contract(format!(
            "{} ids for {} feature rows",
            ids.len(),
            features.nrows()
        )));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    let mut header = vec!["graph".to_string()];
    match targets {
        Targets::None => {}
        Targets::Classes { .. } => header.push("label".into()),
        Targets::Regression(rows) => {
            let d = rows.first().map_or(0, |r| r.len());
            header.extend((0..d).map(|i| format!("y{i}")));
        }
    }
    header.extend((0..features.ncols()).map(|i| format!("f{i}")));
    writeln!(w, "{}", header.join(","))?;
    for i in 0..features.nrows() {
        write!(w, "{}", ids[i])?;
        match targets {
            Targets::None => {}
            Targets::Classes { labels, original } => write!(w, ",{}", original[labels[i]])?,
            Targets::Regression(rows) => {
                for v in &rows[i] {
                    write!(w, ",{v}")?;
                }
            }
        }
        for j in 0..features.ncols() {
            write!(w, ",{}", features[[i, j]])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes per-vertex embedding coordinates: graph id, local vertex id, then
/// one column per dimension.
pub fn write_embedding(coords: &Array2<f64>, ds: &GraphDataset, path: &Path) -> Result<()> {
    if coords.nrows() != ds.total_vertices() {
        return Err(Error::Contract("coordinate rows must match the dataset vertex count".into()));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    let dims = coords.ncols();
    let mut header = vec!["graph".to_string(), "vertex".to_string()];
    header.extend((0..dims).map(|d| format!("x{d}")));
    writeln!(w, "{}", header.join(","))?;
    for global in 0..coords.nrows() {
        let (g, v) = ds.locate(global);
        write!(w, "{g},{v}")?;
        for d in 0..dims {
            write!(w, ",{}", coords[[global, d]])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a gram matrix in precomputed-kernel text form for external SVM
/// cross-checks: each row is `label 0:i 1:K(i,1) ... N:K(i,N)` with
/// 1-indexed sample ids.
pub fn write_libsvm_precomputed(values: &Array2<f64>, labels: &[i64], path: &Path) -> Result<()> {
    let n = values.nrows();
    if labels.len() != n {
        return Err(Error::Contract(format!("{} labels for {n} rows", labels.len())));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    for i in 0..n {
        write!(w, "{} 0:{}", labels[i], i + 1)?;
        for j in 0..n {
            write!(w, " {}:{}", j + 1, values[[i, j]])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
