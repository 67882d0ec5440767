//! Graph-level Gram matrices: aggregation of a vertex kernel state over
//! the graphs' vertex sets, cosine normalization, and graph-level Nystrom
//! features.

use ndarray::parallel::prelude::*;
use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::GraphDataset;
use crate::hierarchy::{self, ClusterTree, Histogram};
use crate::params::{derive_seed, KernelParams};
use crate::variant;
use crate::vertex::{run_message_passing, VertexKernelState};

const GRAPH_LANDMARK_SEED_TAG: u64 = 0x474c_4d4b;

/// A symmetric N x N graph kernel matrix for one iteration.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    values: Array2<f64>,
    pub iteration: usize,
    pub variant: String,
    pub normalized: bool,
}

impl GramMatrix {
    pub fn new(values: Array2<f64>, iteration: usize, variant: impl Into<String>, normalized: bool) -> Self {
        GramMatrix { values, iteration, variant: variant.into(), normalized }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

fn symmetric_from_upper<F>(n: usize, f: F) -> Array2<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let mut out = Array2::zeros((n, n));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for j in i..n {
                row[j] = f(i, j);
            }
        });
    for i in 1..n {
        for j in 0..i {
            out[[i, j]] = out[[j, i]];
        }
    }
    out
}

/// Sums the state's feature rows per graph: row i = sum over graph i's
/// vertices of their feature vectors.
fn per_graph_feature_sums(features: &Array2<f64>, ds: &GraphDataset) -> Array2<f64> {
    let mut sums = Array2::zeros((ds.n_graphs(), features.ncols()));
    sums.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(g, mut row)| {
            for v in ds.vertex_range(g) {
                row.scaled_add(1.0, &features.row(v));
            }
        });
    sums
}

/// R-convolution graph kernel: entry (i, j) is the sum of the vertex kernel
/// over all pairs in V_i x V_j. In Nystrom mode the double sum factors
/// exactly through per-graph feature sums.
pub fn gram_rconv(state: &VertexKernelState, ds: &GraphDataset) -> Result<GramMatrix> {
    if state.n_vertices() != ds.total_vertices() {
        return Err(Error::Contract("state size does not match the dataset".into()));
    }
    let n = ds.n_graphs();
    let values = match state {
        VertexKernelState::Exact { matrix, .. } => {
            // r[g, u] = sum over graph g's vertices v of k[v, u].
            let mut r = Array2::zeros((n, matrix.ncols()));
            r.axis_iter_mut(Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(|(g, mut row)| {
                    for v in ds.vertex_range(g) {
                        row.scaled_add(1.0, &matrix.row(v));
                    }
                });
            symmetric_from_upper(n, |i, j| ds.vertex_range(j).map(|u| r[[i, u]]).sum())
        }
        VertexKernelState::Nystrom { features, .. } => {
            let sums = per_graph_feature_sums(features, ds);
            symmetric_from_upper(n, |i, j| sums.row(i).dot(&sums.row(j)))
        }
    };
    Ok(GramMatrix::new(values, state.iteration(), "", false))
}

/// Assignment graph kernel: entry (i, j) is the optimal assignment value
/// between V_i and V_j under the strong kernel induced by `tree`, computed
/// from per-graph histograms built once.
pub fn gram_assign(state: &VertexKernelState, ds: &GraphDataset, tree: &ClusterTree) -> Result<GramMatrix> {
    let total = ds.total_vertices();
    if state.n_vertices() != total {
        return Err(Error::Contract("state size does not match the dataset".into()));
    }
    if !tree.covers(total) {
        return Err(Error::Contract("hierarchy does not cover all dataset vertices".into()));
    }
    let hists = graph_histograms(ds, tree)?;
    let n = ds.n_graphs();
    let values = symmetric_from_upper(n, |i, j| hierarchy::intersect(&hists[i], &hists[j], tree));
    Ok(GramMatrix::new(values, state.iteration(), "", false))
}

fn graph_histograms(ds: &GraphDataset, tree: &ClusterTree) -> Result<Vec<Histogram>> {
    (0..ds.n_graphs())
        .into_par_iter()
        .map(|g| {
            let members: Vec<usize> = ds.vertex_range(g).collect();
            hierarchy::histogram(&members, tree)
        })
        .collect()
}

/// Cosine normalization: K'(i, j) = K(i, j) / sqrt(K(i, i) K(j, j)).
pub fn normalize(gram: &GramMatrix) -> Result<GramMatrix> {
    let n = gram.n();
    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let d = gram.value(i, i);
        if !(d > 0.0) {
            return Err(Error::Degenerate(format!(
                "cannot normalize: graph {i} has non-positive self-kernel {d}"
            )));
        }
        scale.push(d.sqrt());
    }
    let values = symmetric_from_upper(n, |i, j| gram.value(i, j) / (scale[i] * scale[j]));
    Ok(GramMatrix::new(values, gram.iteration, gram.variant.clone(), true))
}

/// Full pipeline: runs message passing and aggregates one Gram per
/// iteration t = 1..=T with the variant's graph strategy, applying cosine
/// normalization when requested.
pub fn compute_grams(ds: &GraphDataset, params: &KernelParams) -> Result<Vec<GramMatrix>> {
    let var = variant::lookup(&params.variant)?;
    let states = run_message_passing(ds, params)?;
    states
        .iter()
        .map(|state| {
            let mut gram = var.graph.gram(state, ds, params)?;
            gram.variant = var.code.to_string();
            if params.normalize {
                gram = normalize(&gram)?;
            }
            Ok(gram)
        })
        .collect()
}

/// Graph-level Nystrom features, one matrix per supplied state: `m_g`
/// landmark graphs are sampled once from the seed, the Gram columns against
/// them are computed with the variant's graph strategy, and features are
/// fitted so their dot products approximate the graph Gram. Each feature
/// matrix is N x m_g (dropped spectral components leave zero columns), so
/// concatenating across states yields T * m_g dimensions per graph.
pub fn graph_nystrom_features(
    ds: &GraphDataset,
    states: &[VertexKernelState],
    m_g: usize,
    seed: u64,
    params: &KernelParams,
) -> Result<Vec<Array2<f64>>> {
    let n = ds.n_graphs();
    if m_g < 1 || m_g > n {
        return Err(Error::InvalidParameter(format!(
            "graph landmark count {m_g} must be in 1..={n}"
        )));
    }
    let var = variant::lookup(&params.variant)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, GRAPH_LANDMARK_SEED_TAG));
    let mut landmarks = rand::seq::index::sample(&mut rng, n, m_g).into_vec();
    landmarks.sort_unstable();

    states
        .iter()
        .map(|state| {
            let c = match var.graph.code() {
                'R' => rconv_columns(state, ds, &landmarks)?,
                _ => {
                    let tree_seed = variant::graph_hierarchy_seed(params.seed, state.iteration());
                    let tree = crate::hierarchy::build_hierarchy(state, &params.hierarchy, tree_seed)?;
                    if !tree.covers(ds.total_vertices()) {
                        return Err(Error::Contract("hierarchy does not cover all dataset vertices".into()));
                    }
                    let hists = graph_histograms(ds, &tree)?;
                    let mut c = Array2::zeros((n, m_g));
                    c.axis_iter_mut(Axis(0))
                        .into_par_iter()
                        .enumerate()
                        .for_each(|(i, mut row)| {
                            for (col, &l) in landmarks.iter().enumerate() {
                                row[col] = hierarchy::intersect(&hists[i], &hists[l], &tree);
                            }
                        });
                    c
                }
            };
            let mut w = Array2::zeros((m_g, m_g));
            for (p, &lp) in landmarks.iter().enumerate() {
                for q in 0..m_g {
                    w[[p, q]] = c[[lp, q]];
                }
            }
            crate::linalg::nystrom_fit_from_blocks(&c.view(), &w.view())
        })
        .collect()
}

/// Gram columns between every graph and the landmark graphs under the
/// R-convolution aggregation.
fn rconv_columns(state: &VertexKernelState, ds: &GraphDataset, landmarks: &[usize]) -> Result<Array2<f64>> {
    let n = ds.n_graphs();
    let mut c = Array2::zeros((n, landmarks.len()));
    match state {
        VertexKernelState::Exact { matrix, .. } => {
            c.axis_iter_mut(Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(|(i, mut row)| {
                    let mut vertex_sums = vec![0.0; matrix.ncols()];
                    for v in ds.vertex_range(i) {
                        for (s, &k) in vertex_sums.iter_mut().zip(matrix.row(v)) {
                            *s += k;
                        }
                    }
                    for (col, &l) in landmarks.iter().enumerate() {
                        row[col] = ds.vertex_range(l).map(|u| vertex_sums[u]).sum();
                    }
                });
        }
        VertexKernelState::Nystrom { features, .. } => {
            let sums = per_graph_feature_sums(features, ds);
            for (col, &l) in landmarks.iter().enumerate() {
                let lrow = sums.row(l).to_owned();
                for i in 0..n {
                    c[[i, col]] = sums.row(i).dot(&lrow);
                }
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, GraphDataset, Targets};
    use crate::params::KernelParams;
    use crate::vertex::init_state;
    use ndarray::array;

    fn twin_edges() -> GraphDataset {
        let g = || Graph::from_edges(2, &[(0, 1)]).unwrap().with_labels(vec![1, 1]).unwrap();
        GraphDataset::new(vec![g(), g()], Targets::None).unwrap()
    }

    fn delta_params() -> KernelParams {
        KernelParams { base_kernel: "delta".into(), ..Default::default() }
    }

    #[test]
    fn rconv_twin_edges_by_hand() {
        // After one update every vertex pair is 1, so each graph pair sums
        // four cross pairs to 4.
        let ds = twin_edges();
        let state = init_state(&ds, &delta_params()).unwrap();
        let next = crate::vertex::rr_update(&state, &ds, 0.8, 0.2).unwrap();
        let gram = gram_rconv(&next, &ds).unwrap();
        assert!((gram.value(0, 1) - 4.0).abs() < 1e-12);
        assert!((gram.value(0, 0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rconv_single_vertex_graphs_reduce_to_vertex_kernel() {
        let g = |l: i64| Graph::from_edges(1, &[]).unwrap().with_labels(vec![l]).unwrap();
        let ds = GraphDataset::new(vec![g(1), g(2), g(1)], Targets::None).unwrap();
        let state = init_state(&ds, &delta_params()).unwrap();
        let gram = gram_rconv(&state, &ds).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(gram.value(i, j), state.value(i, j));
            }
        }
    }

    #[test]
    fn rconv_diagonal_nonnegative() {
        let ds = twin_edges();
        let state = init_state(&ds, &delta_params()).unwrap();
        let gram = gram_rconv(&state, &ds).unwrap();
        for i in 0..2 {
            assert!(gram.value(i, i) >= 0.0);
        }
    }

    #[test]
    fn gram_of_identical_graphs_is_constant() {
        let ds = twin_edges();
        let params = delta_params();
        let grams = compute_grams(&ds, &params).unwrap();
        for gram in &grams {
            let v = gram.value(0, 0);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((gram.value(i, j) - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn normalize_by_hand() {
        let gram = GramMatrix::new(array![[4.0, 2.0], [2.0, 1.0]], 1, "RR", false);
        let normalized = normalize(&gram).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((normalized.value(i, j) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_unit_diagonal_and_idempotence() {
        let gram = GramMatrix::new(array![[9.0, 1.5, 0.0], [1.5, 4.0, -1.0], [0.0, -1.0, 16.0]], 2, "RR", false);
        let n1 = normalize(&gram).unwrap();
        for i in 0..3 {
            assert!((n1.value(i, i) - 1.0).abs() < 1e-9);
        }
        let n2 = normalize(&n1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((n2.value(i, j) - n1.value(i, j)).abs() < 1e-12);
            }
        }
        assert!(n1.normalized);
    }

    #[test]
    fn normalize_rejects_zero_diagonal() {
        let gram = GramMatrix::new(array![[0.0, 0.0], [0.0, 1.0]], 1, "RR", false);
        match normalize(&gram) {
            Err(Error::Degenerate(msg)) => assert!(msg.contains("graph 0")),
            other => panic!("expected degenerate error, got {other:?}"),
        }
    }

    #[test]
    fn assignment_gram_self_value_is_row_maximum() {
        let g0 = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap().with_labels(vec![1, 2, 1]).unwrap();
        let g1 = Graph::from_edges(2, &[(0, 1)]).unwrap().with_labels(vec![1, 2]).unwrap();
        let ds = GraphDataset::new(vec![g0, g1], Targets::None).unwrap();
        let params = KernelParams { variant: "AA".into(), ..delta_params() };
        let grams = compute_grams(&ds, &params).unwrap();
        for gram in &grams {
            for i in 0..2 {
                for j in 0..2 {
                    assert!(gram.value(i, j) <= gram.value(i, i).min(gram.value(j, j)) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn graph_features_full_rank_match_exact_gram() {
        let g0 = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap().with_labels(vec![1, 2, 1]).unwrap();
        let g1 = Graph::from_edges(2, &[(0, 1)]).unwrap().with_labels(vec![1, 2]).unwrap();
        let g2 = Graph::from_edges(3, &[(0, 1), (0, 2)]).unwrap().with_labels(vec![2, 2, 1]).unwrap();
        let ds = GraphDataset::new(vec![g0, g1, g2], Targets::None).unwrap();
        let params = delta_params();
        let states = crate::vertex::run_message_passing(&ds, &params).unwrap();
        let feats = graph_nystrom_features(&ds, &states, 3, params.seed, &params).unwrap();
        assert_eq!(feats.len(), states.len());
        for (f, state) in feats.iter().zip(&states) {
            assert_eq!(f.ncols(), 3);
            let exact = gram_rconv(state, &ds).unwrap();
            let approx = f.dot(&f.t());
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    num += (approx[[i, j]] - exact.value(i, j)).powi(2);
                    den += exact.value(i, j).powi(2);
                }
            }
            assert!(num.sqrt() <= 1e-6 * den.sqrt());
        }
    }

    #[test]
    fn graph_features_landmarks_deterministic() {
        let ds = twin_edges();
        let params = delta_params();
        let states = crate::vertex::run_message_passing(&ds, &params).unwrap();
        let a = graph_nystrom_features(&ds, &states, 2, 9, &params).unwrap();
        let b = graph_nystrom_features(&ds, &states, 2, 9, &params).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn graph_features_reject_too_many_landmarks() {
        let ds = twin_edges();
        let params = delta_params();
        let states = crate::vertex::run_message_passing(&ds, &params).unwrap();
        assert!(graph_nystrom_features(&ds, &states, 3, 1, &params).is_err());
    }
}
