//! The vertex-level kernel and its message passing recurrence.
//!
//! The kernel between vertices is updated for T iterations as
//! `k^{t+1}(v1, v2) = alpha * k^t(v1, v2) + beta * k_N(N(v1), N(v2))`,
//! where the neighborhood kernel `k_N` is either the R-convolution double
//! sum or the optimal assignment under a per-iteration hierarchy.
//!
//! Two representations are supported. Exact mode holds the full symmetric
//! `nN x nN` matrix over all dataset vertices. Nystrom mode holds an
//! explicit `nN x m` feature matrix fitted against m landmark vertices
//! sampled once at t = 0; every update evaluates only the vertex-vs-landmark
//! kernel columns from the previous features, then refits, keeping memory
//! at O(nN * m).

use ndarray::parallel::prelude::*;
use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::base;
use crate::error::{Error, Result};
use crate::graph::GraphDataset;
use crate::hierarchy::{self, build_hierarchy, ClusterTree, Histogram};
use crate::params::{derive_seed, KernelParams, LandmarkSpec};
use crate::variant;

const LANDMARK_SEED_TAG: u64 = 0x4c41_4e44;
const NEIGHBOR_HIERARCHY_TAG: u64 = 0x4e42_4852;

/// Seed used for the hierarchy that drives the assignment neighborhood
/// update taking the state at iteration `t` to `t + 1`. Exposed so that
/// reference implementations can rebuild the identical tree.
pub fn neighborhood_hierarchy_seed(params_seed: u64, t: usize) -> u64 {
    derive_seed(params_seed, NEIGHBOR_HIERARCHY_TAG ^ (t as u64) << 8)
}

/// Vertex kernel at some iteration t: a full matrix or Nystrom features.
#[derive(Debug, Clone)]
pub enum VertexKernelState {
    Exact {
        /// Symmetric nN x nN matrix of kernel values, global vertex ids.
        matrix: Array2<f64>,
        t: usize,
    },
    Nystrom {
        /// nN x m features; kernel values are row dot products.
        features: Array2<f64>,
        /// Global ids of the m landmark vertices, ascending.
        landmark_ids: Vec<usize>,
        t: usize,
    },
}

impl VertexKernelState {
    pub fn iteration(&self) -> usize {
        match self {
            VertexKernelState::Exact { t, .. } | VertexKernelState::Nystrom { t, .. } => *t,
        }
    }

    pub fn n_vertices(&self) -> usize {
        match self {
            VertexKernelState::Exact { matrix, .. } => matrix.nrows(),
            VertexKernelState::Nystrom { features, .. } => features.nrows(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, VertexKernelState::Exact { .. })
    }

    /// Kernel value between two vertices by global id.
    pub fn value(&self, u: usize, v: usize) -> f64 {
        match self {
            VertexKernelState::Exact { matrix, .. } => matrix[[u, v]],
            VertexKernelState::Nystrom { features, .. } => features.row(u).dot(&features.row(v)),
        }
    }

    /// Materializes the full kernel matrix (intended for small inputs).
    pub fn dense(&self) -> Array2<f64> {
        match self {
            VertexKernelState::Exact { matrix, .. } => matrix.clone(),
            VertexKernelState::Nystrom { features, .. } => features.dot(&features.t()),
        }
    }
}

/// Fills only the upper triangle through `f`, then mirrors, so the result
/// is exactly symmetric.
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

/// out[v, :] = sum of m's rows over the neighbors of v.
fn neighbor_row_sums(m: &Array2<f64>, ds: &GraphDataset) -> Array2<f64> {
    let mut out = Array2::zeros(m.raw_dim());
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(v, mut row)| {
            for u in ds.global_neighbors(v) {
                row.scaled_add(1.0, &m.row(u));
            }
        });
    out
}

fn gather_rows(m: &Array2<f64>, ids: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((ids.len(), m.ncols()));
    for (r, &id) in ids.iter().enumerate() {
        out.row_mut(r).assign(&m.row(id));
    }
    out
}

/// Initial state: evaluates the base kernel named in `params` over all
/// vertex pairs (exact mode) or over the vertex-vs-landmark columns with
/// landmarks sampled uniformly without replacement from the seed.
pub fn init_state(ds: &GraphDataset, params: &KernelParams) -> Result<VertexKernelState> {
    match params.landmarks {
        LandmarkSpec::Exact => init_exact(ds, params),
        LandmarkSpec::Count(m) => {
            let n = ds.total_vertices();
            if m > n {
                return Err(Error::InvalidParameter(format!(
                    "landmark count {m} exceeds the {n} dataset vertices"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, LANDMARK_SEED_TAG));
            let mut ids = rand::seq::index::sample(&mut rng, n, m).into_vec();
            ids.sort_unstable();
            init_state_with_landmarks(ds, params, ids)
        }
    }
}

fn init_exact(ds: &GraphDataset, params: &KernelParams) -> Result<VertexKernelState> {
    let kernel = base::by_name(&params.base_kernel)?;
    kernel.check(ds)?;
    let n = ds.total_vertices();
    let matrix = symmetric_from_upper(n, |i, j| kernel.eval(ds, i, j));
    Ok(VertexKernelState::Exact { matrix, t: 0 })
}

/// Nystrom initial state with caller-chosen landmarks (used by tests that
/// need landmarks mapped through a vertex permutation).
pub fn init_state_with_landmarks(
    ds: &GraphDataset,
    params: &KernelParams,
    landmark_ids: Vec<usize>,
) -> Result<VertexKernelState> {
    let kernel = base::by_name(&params.base_kernel)?;
    kernel.check(ds)?;
    let n = ds.total_vertices();
    if landmark_ids.is_empty() || landmark_ids.iter().any(|&l| l >= n) {
        return Err(Error::InvalidParameter("landmark ids must be non-empty and within range".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let features = crate::linalg::nystrom_fit(|i, l| kernel.eval(ds, i, l), &all, &landmark_ids)?;
    Ok(VertexKernelState::Nystrom { features, landmark_ids, t: 0 })
}

/// One R-convolution update:
/// `k^{t+1}(v1, v2) = alpha * k^t(v1, v2)
///   + beta * sum_{u1 in N(v1)} sum_{u2 in N(v2)} k^t(u1, u2)`.
///
/// Exact mode computes the double sum as two neighbor row-sum passes and
/// mirrors the upper triangle. Nystrom mode evaluates only the
/// vertex-vs-landmark columns from the current features and refits with the
/// same landmarks.
pub fn rr_update(state: &VertexKernelState, ds: &GraphDataset, alpha: f64, beta: f64) -> Result<VertexKernelState> {
    if state.n_vertices() != ds.total_vertices() {
        return Err(Error::Contract("state size does not match the dataset".into()));
    }
    match state {
        VertexKernelState::Exact { matrix, t } => {
            // s[j, u] = sum_{w in N(j)} k[w, u], so the double sum over
            // N(i) x N(j) is sum_{u in N(i)} s[j, u].
            let s = neighbor_row_sums(matrix, ds);
            let n = matrix.nrows();
            let next = symmetric_from_upper(n, |i, j| {
                let mut acc = 0.0;
                for u in ds.global_neighbors(i) {
                    acc += s[[j, u]];
                }
                alpha * matrix[[i, j]] + beta * acc
            });
            Ok(VertexKernelState::Exact { matrix: next, t: t + 1 })
        }
        VertexKernelState::Nystrom { features, landmark_ids, t } => {
            let phi_l = gather_rows(features, landmark_ids);
            let s_phi = neighbor_row_sums(features, ds);
            let s_phi_l = gather_rows(&s_phi, landmark_ids);
            let c = features.dot(&phi_l.t()) * alpha + s_phi.dot(&s_phi_l.t()) * beta;
            let w = gather_rows(&c, landmark_ids);
            let next = crate::linalg::nystrom_fit_from_blocks(&c.view(), &w.view())?;
            Ok(VertexKernelState::Nystrom { features: next, landmark_ids: landmark_ids.clone(), t: t + 1 })
        }
    }
}

/// One assignment update:
/// `k^{t+1}(v1, v2) = alpha * k^t(v1, v2) + beta * A(N(v1), N(v2))`,
/// where A is the optimal assignment under the strong kernel induced by
/// `tree` (built from the state being updated), evaluated by weighted
/// histogram intersection. Unequal neighborhood sizes are handled by the
/// implicit zero-padding of the histogram formula; empty neighborhoods
/// contribute zero.
pub fn assign_update(
    state: &VertexKernelState,
    ds: &GraphDataset,
    alpha: f64,
    beta: f64,
    tree: &ClusterTree,
) -> Result<VertexKernelState> {
    let n = ds.total_vertices();
    if state.n_vertices() != n {
        return Err(Error::Contract("state size does not match the dataset".into()));
    }
    if !tree.covers(n) {
        return Err(Error::Contract("hierarchy does not cover all dataset vertices".into()));
    }
    let hists: Vec<Histogram> = (0..n)
        .into_par_iter()
        .map(|v| {
            let members: Vec<usize> = ds.global_neighbors(v).collect();
            hierarchy::histogram(&members, tree)
        })
        .collect::<Result<_>>()?;
    match state {
        VertexKernelState::Exact { matrix, t } => {
            let next = symmetric_from_upper(n, |i, j| {
                alpha * matrix[[i, j]] + beta * hierarchy::intersect(&hists[i], &hists[j], tree)
            });
            Ok(VertexKernelState::Exact { matrix: next, t: t + 1 })
        }
        VertexKernelState::Nystrom { features, landmark_ids, t } => {
            let phi_l = gather_rows(features, landmark_ids);
            let mut c = features.dot(&phi_l.t()) * alpha;
            c.axis_iter_mut(Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(|(v, mut row)| {
                    for (col, &l) in landmark_ids.iter().enumerate() {
                        row[col] += beta * hierarchy::intersect(&hists[v], &hists[l], tree);
                    }
                });
            let w = gather_rows(&c, landmark_ids);
            let next = crate::linalg::nystrom_fit_from_blocks(&c.view(), &w.view())?;
            Ok(VertexKernelState::Nystrom { features: next, landmark_ids: landmark_ids.clone(), t: t + 1 })
        }
    }
}

/// States and the hierarchies that produced them (None for R-convolution
/// steps), as returned by [`run_message_passing_traced`].
pub struct MessagePassingTrace {
    /// One state per t = 1..=T.
    pub states: Vec<VertexKernelState>,
    /// `neighborhood_trees[i]` drove the update producing `states[i]`.
    pub neighborhood_trees: Vec<Option<ClusterTree>>,
}

/// Runs the recurrence for `params.iterations` steps and returns every
/// intermediate state (one per t = 1..=T), so graph-level Gram matrices can
/// be formed per iteration. The first letter of the variant selects the
/// neighborhood update; assignment variants build a fresh hierarchy from
/// the previous step's kernel values before each update.
pub fn run_message_passing(ds: &GraphDataset, params: &KernelParams) -> Result<Vec<VertexKernelState>> {
    Ok(run_message_passing_traced(ds, params)?.states)
}

/// Like [`run_message_passing`] but also returns the per-step hierarchies,
/// so independent reference evaluations can reuse the identical trees.
pub fn run_message_passing_traced(ds: &GraphDataset, params: &KernelParams) -> Result<MessagePassingTrace> {
    params.validate(Some(ds))?;
    let var = variant::lookup(&params.variant)?;
    let assignment_neighborhood = var.neighborhood.code() == 'A';
    let mut states = Vec::with_capacity(params.iterations + 1);
    let mut trees = Vec::with_capacity(params.iterations);
    states.push(init_state(ds, params)?);
    for _ in 0..params.iterations {
        let prev = states.last().unwrap();
        if assignment_neighborhood {
            let seed = neighborhood_hierarchy_seed(params.seed, prev.iteration());
            let tree = build_hierarchy(prev, &params.hierarchy, seed)?;
            let next = assign_update(prev, ds, params.alpha, params.beta, &tree)?;
            trees.push(Some(tree));
            states.push(next);
        } else {
            let next = rr_update(prev, ds, params.alpha, params.beta)?;
            trees.push(None);
            states.push(next);
        }
    }
    states.remove(0);
    Ok(MessagePassingTrace { states, neighborhood_trees: trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, GraphDataset, Targets};

    /// Two single-edge graphs, every vertex carrying the same label.
    fn twin_edges() -> GraphDataset {
        let g = || Graph::from_edges(2, &[(0, 1)]).unwrap().with_labels(vec![1, 1]).unwrap();
        GraphDataset::new(vec![g(), g()], Targets::None).unwrap()
    }

    fn delta_params() -> KernelParams {
        KernelParams { base_kernel: "delta".into(), ..Default::default() }
    }

    #[test]
    fn init_exact_delta_two_vertices() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap().with_labels(vec![5, 5]).unwrap();
        let ds = GraphDataset::new(vec![g], Targets::None).unwrap();
        let state = init_state(&ds, &delta_params()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(state.value(i, j), 1.0);
            }
        }
    }

    #[test]
    fn init_nystrom_full_rank_matches_exact() {
        let ds = twin_edges();
        let exact = init_state(&ds, &delta_params()).unwrap();
        let params = KernelParams { landmarks: LandmarkSpec::Count(4), ..delta_params() };
        let approx = init_state(&ds, &params).unwrap();
        let (e, a) = (exact.dense(), approx.dense());
        let num: f64 = (&a - &e).iter().map(|x| x * x).sum::<f64>().sqrt();
        let den: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(num <= 1e-6 * den);
    }

    #[test]
    fn init_nystrom_rejects_too_many_landmarks() {
        let ds = twin_edges();
        let params = KernelParams { landmarks: LandmarkSpec::Count(5), ..delta_params() };
        assert!(init_state(&ds, &params).is_err());
    }

    #[test]
    fn init_nystrom_landmarks_deterministic() {
        let ds = twin_edges();
        let params = KernelParams { landmarks: LandmarkSpec::Count(2), ..delta_params() };
        let a = init_state(&ds, &params).unwrap();
        let b = init_state(&ds, &params).unwrap();
        match (a, b) {
            (
                VertexKernelState::Nystrom { landmark_ids: la, .. },
                VertexKernelState::Nystrom { landmark_ids: lb, .. },
            ) => assert_eq!(la, lb),
            _ => panic!("expected Nystrom states"),
        }
    }

    #[test]
    fn rr_update_twin_edges_by_hand() {
        // Every vertex has exactly one neighbor and all labels agree, so
        // each entry becomes 0.8 * 1 + 0.2 * 1 = 1.
        let ds = twin_edges();
        let state = init_state(&ds, &delta_params()).unwrap();
        let next = rr_update(&state, &ds, 0.8, 0.2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((next.value(i, j) - 1.0).abs() < 1e-15);
            }
        }
        assert_eq!(next.iteration(), 1);
    }

    #[test]
    fn rr_update_beta_zero_scales_by_alpha() {
        let ds = twin_edges();
        let mut state = init_state(&ds, &delta_params()).unwrap();
        let k0 = state.dense();
        for t in 1..=3 {
            state = rr_update(&state, &ds, 0.8, 0.0).unwrap();
            let expected = 0.8f64.powi(t);
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(state.value(i, j), expected * k0[[i, j]]);
                }
            }
        }
    }

    #[test]
    fn rr_update_isolated_vertex_keeps_alpha_row() {
        let g0 = Graph::from_edges(1, &[]).unwrap().with_labels(vec![1]).unwrap();
        let g1 = Graph::from_edges(2, &[(0, 1)]).unwrap().with_labels(vec![1, 1]).unwrap();
        let ds = GraphDataset::new(vec![g0, g1], Targets::None).unwrap();
        let state = init_state(&ds, &delta_params()).unwrap();
        let next = rr_update(&state, &ds, 0.7, 0.3).unwrap();
        // Vertex 0 is isolated: its row is alpha times the old row.
        for j in 0..3 {
            assert!((next.value(0, j) - 0.7 * state.value(0, j)).abs() < 1e-15);
        }
    }

    #[test]
    fn alpha_one_beta_zero_is_identity_recurrence() {
        let ds = twin_edges();
        let params = KernelParams { alpha: 1.0, beta: 0.0, iterations: 4, ..delta_params() };
        let states = run_message_passing(&ds, &params).unwrap();
        let k0 = init_state(&ds, &params).unwrap().dense();
        assert_eq!(states.len(), 4);
        for s in &states {
            assert_eq!(s.dense(), k0);
        }
    }

    #[test]
    fn single_iteration_equals_one_update() {
        let ds = twin_edges();
        let params = KernelParams { iterations: 1, ..delta_params() };
        let states = run_message_passing(&ds, &params).unwrap();
        let manual = rr_update(&init_state(&ds, &params).unwrap(), &ds, params.alpha, params.beta).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(states[0].dense(), manual.dense());
    }

    #[test]
    fn exact_matrices_are_exactly_symmetric() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)])
            .unwrap()
            .with_labels(vec![1, 2, 1, 2])
            .unwrap();
        let ds = GraphDataset::new(vec![g], Targets::None).unwrap();
        let mut state = init_state(&ds, &delta_params()).unwrap();
        for _ in 0..3 {
            state = rr_update(&state, &ds, 0.8, 0.2).unwrap();
            let m = state.dense();
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(m[[i, j]], m[[j, i]]);
                }
            }
        }
    }
}
