//! Seeded synthetic dataset generation, for tests, demos and benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, GraphDataset, Targets};

/// Shape of a random dataset: Erdos-Renyi-style graphs with optional
/// discrete labels, attribute vectors and class targets.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_graphs: usize,
    pub min_vertices: usize,
    pub max_vertices: usize,
    pub edge_prob: f64,
    /// Number of distinct vertex labels, when labels are wanted.
    pub n_labels: Option<usize>,
    /// Attribute dimension, when attributes are wanted.
    pub attr_dim: Option<usize>,
    /// Number of classes, when class targets are wanted.
    pub n_classes: Option<usize>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_graphs: 8,
            min_vertices: 3,
            max_vertices: 7,
            edge_prob: 0.4,
            n_labels: Some(3),
            attr_dim: None,
            n_classes: None,
            seed: 1,
        }
    }
}

/// Generates a random dataset. Deterministic given the spec.
pub fn random_dataset(spec: &SynthSpec) -> GraphDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut graphs = Vec::with_capacity(spec.n_graphs);
    for _ in 0..spec.n_graphs {
        let n = rng.random_range(spec.min_vertices..=spec.max_vertices);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < spec.edge_prob {
                    edges.push((i, j));
                }
            }
        }
        let mut g = Graph::from_edges(n, &edges).expect("generated edges are valid");
        if let Some(l) = spec.n_labels {
            let labels = (0..n).map(|_| rng.random_range(0..l as i64)).collect();
            g = g.with_labels(labels).unwrap();
        }
        if let Some(d) = spec.attr_dim {
            let attrs = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            g = g.with_attributes(attrs).unwrap();
        }
        graphs.push(g);
    }
    let targets = match spec.n_classes {
        Some(c) => {
            // Round-robin base assignment keeps every class populated.
            let labels = (0..spec.n_graphs).map(|i| i % c).collect();
            Targets::Classes { labels, original: (0..c as i64).collect() }
        }
        None => Targets::None,
    };
    GraphDataset::new(graphs, targets).expect("generated dataset is consistent")
}
