//! Naive reference implementations kept deliberately independent of the
//! optimized code paths: the vertex recurrence as a direct unmemoized
//! recursion, the assignment kernel as an exhaustive search over
//! bijections, and graph aggregation as plain nested loops. Intended for
//! verification on small inputs; costs are exponential in T and factorial
//! in set size.

use itertools::Itertools;
use ndarray::Array2;

use crate::base::BaseKernel;
use crate::error::Result;
use crate::graph::GraphDataset;
use crate::hierarchy::ClusterTree;

/// Direct recursion of the R-convolution recurrence:
/// `k^t(u, v) = alpha k^{t-1}(u, v) + beta sum sum k^{t-1}(a, b)`.
pub fn naive_rr_vertex(
    ds: &GraphDataset,
    base: &dyn BaseKernel,
    alpha: f64,
    beta: f64,
    t: usize,
    u: usize,
    v: usize,
) -> f64 {
    if t == 0 {
        return base.eval(ds, u, v);
    }
    let mut neighbor_sum = 0.0;
    for a in ds.global_neighbors(u) {
        for b in ds.global_neighbors(v) {
            neighbor_sum += naive_rr_vertex(ds, base, alpha, beta, t - 1, a, b);
        }
    }
    alpha * naive_rr_vertex(ds, base, alpha, beta, t - 1, u, v) + beta * neighbor_sum
}

/// Full vertex matrix at iteration `t` via [`naive_rr_vertex`].
pub fn naive_rr_matrix(ds: &GraphDataset, base: &dyn BaseKernel, alpha: f64, beta: f64, t: usize) -> Array2<f64> {
    let n = ds.total_vertices();
    let mut out = Array2::zeros((n, n));
    for u in 0..n {
        for v in 0..n {
            out[[u, v]] = naive_rr_vertex(ds, base, alpha, beta, t, u, v);
        }
    }
    out
}

/// Exhaustive optimal assignment between two vertex sets under the strong
/// kernel induced by `tree`: the maximum over all injections of the smaller
/// set into the larger of the summed strong kernel (unmatched elements
/// contribute zero, matching the histogram formula's padding).
pub fn brute_force_assignment(tree: &ClusterTree, xs: &[usize], ys: &[usize]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Ok(0.0);
    }
    let (small, large) = if xs.len() <= ys.len() { (xs, ys) } else { (ys, xs) };
    let mut pair = Array2::zeros((small.len(), large.len()));
    for (i, &x) in small.iter().enumerate() {
        for (j, &y) in large.iter().enumerate() {
            pair[[i, j]] = tree.strong_kernel(x, y)?;
        }
    }
    let mut best = f64::NEG_INFINITY;
    for perm in (0..large.len()).permutations(small.len()) {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| pair[[i, j]]).sum();
        best = best.max(total);
    }
    Ok(best)
}

/// One naive assignment-neighborhood step from an explicit previous
/// matrix, using the supplied tree (built from that matrix's state).
pub fn naive_assign_step(
    ds: &GraphDataset,
    previous: &Array2<f64>,
    tree: &ClusterTree,
    alpha: f64,
    beta: f64,
) -> Result<Array2<f64>> {
    let n = ds.total_vertices();
    let mut out = Array2::zeros((n, n));
    let neighborhoods: Vec<Vec<usize>> = (0..n).map(|v| ds.global_neighbors(v).collect()).collect();
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] =
                alpha * previous[[i, j]] + beta * brute_force_assignment(tree, &neighborhoods[i], &neighborhoods[j])?;
        }
    }
    Ok(out)
}

/// Graph-level R-convolution by quadruple loop over vertex pairs.
pub fn naive_gram_rconv(vertex_matrix: &Array2<f64>, ds: &GraphDataset) -> Array2<f64> {
    let n = ds.n_graphs();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut sum = 0.0;
            for u in ds.vertex_range(i) {
                for v in ds.vertex_range(j) {
                    sum += vertex_matrix[[u, v]];
                }
            }
            out[[i, j]] = sum;
        }
    }
    out
}

/// Graph-level assignment by exhaustive bijection search between the
/// graphs' vertex sets.
pub fn naive_gram_assign(tree: &ClusterTree, ds: &GraphDataset) -> Result<Array2<f64>> {
    let n = ds.n_graphs();
    let sets: Vec<Vec<usize>> = (0..n).map(|g| ds.vertex_range(g).collect()).collect();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = brute_force_assignment(tree, &sets[i], &sets[j])?;
        }
    }
    Ok(out)
}
