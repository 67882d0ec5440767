//! Graph and dataset model.
//!
//! Graphs are simple and undirected, with optional discrete vertex labels
//! and/or continuous attribute vectors. A [`GraphDataset`] groups graphs with
//! per-graph targets and assigns every vertex a global id in `[0, nN)` so
//! that kernel matrices over the whole dataset can be indexed uniformly.
//! Both types are immutable after construction.

use std::collections::BTreeSet;
use std::ops::Range;

use crate::error::{Error, Result};

/// A simple undirected graph with sorted neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<u32>>,
    labels: Option<Vec<i64>>,
    attributes: Option<Vec<Vec<f64>>>,
}

impl Graph {
    /// Builds a graph from an edge list. Edges are symmetrized and
    /// deduplicated; self-loops are rejected.
    pub fn from_edges(n_vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut sets: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n_vertices];
        for &(a, b) in edges {
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range for {n_vertices} vertices"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {a}")));
            }
            sets[a].insert(b as u32);
            sets[b].insert(a as u32);
        }
        Ok(Graph {
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            labels: None,
            attributes: None,
        })
    }

    /// Assembles a graph from raw parts without checking any invariant.
    /// Intended for loaders and for tests that need invalid graphs to feed
    /// [`validate`].
    pub fn from_parts_unchecked(
        adjacency: Vec<Vec<u32>>,
        labels: Option<Vec<i64>>,
        attributes: Option<Vec<Vec<f64>>>,
    ) -> Self {
        Graph { adjacency, labels, attributes }
    }

    /// Attaches one discrete label per vertex.
    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.n_vertices() {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} vertices",
                labels.len(),
                self.n_vertices()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Attaches one attribute vector per vertex; all vectors must share the
    /// same dimension d >= 1.
    pub fn with_attributes(mut self, attributes: Vec<Vec<f64>>) -> Result<Self> {
        if attributes.len() != self.n_vertices() {
            return Err(Error::InvalidParameter(format!(
                "{} attribute rows for {} vertices",
                attributes.len(),
                self.n_vertices()
            )));
        }
        if let Some(first) = attributes.first() {
            let d = first.len();
            if d == 0 {
                return Err(Error::InvalidParameter("attribute dimension must be >= 1".into()));
            }
            if attributes.iter().any(|a| a.len() != d) {
                return Err(Error::InvalidParameter("ragged attribute rows".into()));
            }
        }
        self.attributes = Some(attributes);
        Ok(self)
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    /// Undirected edge count.
    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(|n| n.len()).sum::<usize>() / 2
    }

    /// Sorted neighbors of `v`. Panics if `v` is out of range.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn attributes(&self) -> Option<&[Vec<f64>]> {
        self.attributes.as_deref()
    }

    pub fn attribute_dim(&self) -> Option<usize> {
        self.attributes.as_ref().and_then(|a| a.first().map(|r| r.len()))
    }

    /// Relabels vertices through a permutation: vertex `v` becomes
    /// `perm[v]`. Labels and attributes move with their vertices.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.n_vertices();
        if perm.len() != n {
            return Err(Error::InvalidParameter("permutation length mismatch".into()));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidParameter("not a bijection on [0, n)".into()));
            }
            seen[p] = true;
        }
        let mut adjacency = vec![Vec::new(); n];
        for v in 0..n {
            let mut row: Vec<u32> = self.adjacency[v].iter().map(|&u| perm[u as usize] as u32).collect();
            row.sort_unstable();
            adjacency[perm[v]] = row;
        }
        let relocate_labels = self.labels.as_ref().map(|ls| {
            let mut out = vec![0i64; n];
            for v in 0..n {
                out[perm[v]] = ls[v];
            }
            out
        });
        let relocate_attrs = self.attributes.as_ref().map(|at| {
            let mut out = vec![Vec::new(); n];
            for v in 0..n {
                out[perm[v]] = at[v].clone();
            }
            out
        });
        Ok(Graph { adjacency, labels: relocate_labels, attributes: relocate_attrs })
    }
}

/// Builds the barbell graph B(h, k): two copies of the complete graph K_h
/// joined by a path of k vertices. Vertex numbering is deterministic:
/// clique A is `0..h`, the path is `h..h+k`, clique B is `h+k..2h+k`, and
/// the path attaches to vertices `0` and `2h+k-1`.
pub fn make_barbell(h: usize, k: usize) -> Result<Graph> {
    if h < 3 {
        return Err(Error::InvalidParameter(format!("barbell clique size h={h} must be >= 3")));
    }
    if k < 1 {
        return Err(Error::InvalidParameter(format!("barbell path length k={k} must be >= 1")));
    }
    let n = 2 * h + k;
    let mut edges = Vec::new();
    for i in 0..h {
        for j in (i + 1)..h {
            edges.push((i, j));
            edges.push((h + k + i, h + k + j));
        }
    }
    for i in 0..(k - 1) {
        edges.push((h + i, h + i + 1));
    }
    edges.push((0, h));
    edges.push((h + k - 1, 2 * h + k - 1));
    Graph::from_edges(n, &edges)
}

/// Per-graph prediction targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    None,
    /// Dense class ids in `0..n_classes`, plus the original label of each
    /// dense class in sorted original order.
    Classes { labels: Vec<usize>, original: Vec<i64> },
    Regression(Vec<Vec<f64>>),
}

impl Targets {
    pub fn len(&self) -> Option<usize> {
        match self {
            Targets::None => None,
            Targets::Classes { labels, .. } => Some(labels.len()),
            Targets::Regression(v) => Some(v.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len().unwrap_or(0) == 0
    }

    pub fn n_classes(&self) -> Option<usize> {
        match self {
            Targets::Classes { original, .. } => Some(original.len()),
            _ => None,
        }
    }
}

/// A collection of graphs with targets and a global vertex index: vertex
/// `v` of graph `g` has global id `offset(g) + v`, graphs in order.
#[derive(Debug, Clone)]
pub struct GraphDataset {
    graphs: Vec<Graph>,
    targets: Targets,
    offsets: Vec<usize>,
    vertex_graph: Vec<u32>,
}

impl GraphDataset {
    pub fn new(graphs: Vec<Graph>, targets: Targets) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::InvalidParameter("dataset has no graphs".into()));
        }
        if let Some(t) = targets.len() {
            if t != graphs.len() {
                return Err(Error::InvalidParameter(format!(
                    "{} targets for {} graphs",
                    t,
                    graphs.len()
                )));
            }
        }
        let has_labels = graphs[0].labels().is_some();
        let dim = graphs[0].attribute_dim();
        for (i, g) in graphs.iter().enumerate() {
            if g.labels().is_some() != has_labels {
                return Err(Error::InvalidParameter(format!(
                    "graph {i}: label presence differs across the dataset"
                )));
            }
            if g.attribute_dim() != dim {
                return Err(Error::InvalidParameter(format!(
                    "graph {i}: attribute dimension mismatch"
                )));
            }
        }
        Ok(Self::from_parts_unchecked(graphs, targets))
    }

    /// Builds the global index without cross-graph consistency checks.
    pub fn from_parts_unchecked(graphs: Vec<Graph>, targets: Targets) -> Self {
        let mut offsets = Vec::with_capacity(graphs.len() + 1);
        let mut vertex_graph = Vec::new();
        let mut total = 0usize;
        for (g, graph) in graphs.iter().enumerate() {
            offsets.push(total);
            total += graph.n_vertices();
            vertex_graph.extend(std::iter::repeat(g as u32).take(graph.n_vertices()));
        }
        offsets.push(total);
        GraphDataset { graphs, targets, offsets, vertex_graph }
    }

    pub fn n_graphs(&self) -> usize {
        self.graphs.len()
    }

    pub fn total_vertices(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn graph(&self, g: usize) -> &Graph {
        &self.graphs[g]
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Dense class ids, if the targets are class labels.
    pub fn class_labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classes { labels, .. } => Some(labels),
            _ => None,
        }
    }

    pub fn global_id(&self, g: usize, v: usize) -> usize {
        debug_assert!(v < self.graphs[g].n_vertices());
        self.offsets[g] + v
    }

    /// Maps a global vertex id back to (graph, local vertex).
    pub fn locate(&self, global: usize) -> (usize, usize) {
        let g = self.vertex_graph[global] as usize;
        (g, global - self.offsets[g])
    }

    pub fn graph_of(&self, global: usize) -> usize {
        self.vertex_graph[global] as usize
    }

    /// Global ids of graph `g`'s vertices.
    pub fn vertex_range(&self, g: usize) -> Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    /// Neighbors of a vertex, as global ids in ascending order.
    pub fn global_neighbors(&self, global: usize) -> impl Iterator<Item = usize> + '_ {
        let (g, v) = self.locate(global);
        let off = self.offsets[g];
        self.graphs[g].neighbors(v).iter().map(move |&u| off + u as usize)
    }

    pub fn global_degree(&self, global: usize) -> usize {
        let (g, v) = self.locate(global);
        self.graphs[g].degree(v)
    }

    pub fn has_labels(&self) -> bool {
        self.graphs[0].labels().is_some()
    }

    pub fn has_attributes(&self) -> bool {
        self.graphs[0].attributes().is_some()
    }

    pub fn attribute_dim(&self) -> Option<usize> {
        self.graphs[0].attribute_dim()
    }

    pub fn vertex_label(&self, global: usize) -> Option<i64> {
        let (g, v) = self.locate(global);
        self.graphs[g].labels().map(|ls| ls[v])
    }

    pub fn vertex_attribute(&self, global: usize) -> Option<&[f64]> {
        let (g, v) = self.locate(global);
        self.graphs[g].attributes().map(|a| a[v].as_slice())
    }

    /// Returns a copy with every attribute dimension standardized to zero
    /// mean and unit variance over all vertices (dimensions with zero
    /// variance are centered only).
    pub fn standardize_attributes(&self) -> GraphDataset {
        let Some(d) = self.attribute_dim() else {
            return self.clone();
        };
        let n = self.total_vertices() as f64;
        let mut mean = vec![0.0; d];
        let mut var = vec![0.0; d];
        for g in &self.graphs {
            for row in g.attributes().unwrap() {
                for (j, &x) in row.iter().enumerate() {
                    mean[j] += x;
                }
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        for g in &self.graphs {
            for row in g.attributes().unwrap() {
                for (j, &x) in row.iter().enumerate() {
                    var[j] += (x - mean[j]).powi(2);
                }
            }
        }
        let std: Vec<f64> = var.iter().map(|&v| (v / n).sqrt()).collect();
        let graphs = self
            .graphs
            .iter()
            .map(|g| {
                let attrs = g
                    .attributes()
                    .unwrap()
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .map(|(j, &x)| if std[j] > 0.0 { (x - mean[j]) / std[j] } else { x - mean[j] })
                            .collect()
                    })
                    .collect();
                Graph::from_parts_unchecked(
                    g.adjacency.clone(),
                    g.labels().map(|l| l.to_vec()),
                    Some(attrs),
                )
            })
            .collect();
        GraphDataset::from_parts_unchecked(graphs, self.targets.clone())
    }
}

/// One broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Graph index, or `None` for dataset-level rules.
    pub graph: Option<usize>,
    pub rule: &'static str,
    pub detail: String,
}

/// Checks every graph and dataset invariant, returning all violations
/// instead of failing on the first.
pub fn validate(ds: &GraphDataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |graph, rule, detail: String| out.push(Violation { graph, rule, detail });

    for (gi, g) in ds.graphs().iter().enumerate() {
        let n = g.n_vertices();
        for v in 0..n {
            let mut prev: Option<u32> = None;
            for &u in g.neighbors(v) {
                if u as usize >= n {
                    push(Some(gi), "neighbor-range", format!("vertex {v} lists neighbor {u} >= {n}"));
                    continue;
                }
                if u as usize == v {
                    push(Some(gi), "self-loop", format!("vertex {v} lists itself"));
                }
                if let Some(p) = prev {
                    if u <= p {
                        push(Some(gi), "sorted-neighbors", format!("vertex {v} list not strictly increasing"));
                    }
                }
                prev = Some(u);
                if (u as usize) < n && !g.neighbors(u as usize).contains(&(v as u32)) {
                    push(Some(gi), "asymmetry", format!("edge {v}->{u} has no reverse"));
                }
            }
        }
        if let Some(ls) = g.labels() {
            if ls.len() != n {
                push(Some(gi), "label-length", format!("{} labels for {n} vertices", ls.len()));
            }
        }
        if let Some(at) = g.attributes() {
            if at.len() != n {
                push(Some(gi), "attribute-length", format!("{} rows for {n} vertices", at.len()));
            }
            if let Some(d) = at.first().map(|r| r.len()) {
                if d == 0 {
                    push(Some(gi), "attribute-dim", "zero-dimensional attributes".into());
                }
                if at.iter().any(|r| r.len() != d) {
                    push(Some(gi), "attribute-dim", "ragged attribute rows".into());
                }
            }
        }
    }

    if let Some(t) = ds.targets().len() {
        if t != ds.n_graphs() {
            push(None, "target-length", format!("{t} targets for {} graphs", ds.n_graphs()));
        }
    }
    let has_labels = ds.graphs()[0].labels().is_some();
    let dim = ds.graphs()[0].attribute_dim();
    for (gi, g) in ds.graphs().iter().enumerate().skip(1) {
        if g.labels().is_some() != has_labels {
            push(Some(gi), "label-presence", "label presence differs across the dataset".into());
        }
        if g.attribute_dim() != dim {
            push(
                Some(gi),
                "attribute-dimension-mismatch",
                format!("dimension {:?} differs from graph 0's {:?}", g.attribute_dim(), dim),
            );
        }
    }
    out
}
