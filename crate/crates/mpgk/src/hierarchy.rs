//! Cluster hierarchies and the optimal assignment kernel.
//!
//! A [`ClusterTree`] is a weighted tree over all dataset vertices (as
//! leaves) built by recursive kernel k-means. It induces a strong kernel
//! `k_s(x, y) = omega(deepest common ancestor of leaf x and leaf y)`, and
//! the optimal assignment between two vertex sets under `k_s` is evaluated
//! in linear time as a weighted histogram intersection:
//! `sum_v w(v) * min(H_X(v), H_Y(v))`.
//!
//! Omega grows with depth as `(d - 1) / d`, with the root pinned at 0 so
//! that the per-node weights `w(v) = omega(v) - omega(parent(v))` stay
//! nonnegative, which is what makes the assignment kernel positive
//! semidefinite.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{derive_seed, HierarchyConfig};
use crate::vertex::VertexKernelState;

static TREE_IDS: AtomicU64 = AtomicU64::new(1);

/// Omega value for a node at the given depth (root = depth 0).
pub fn depth_omega(depth: usize) -> f64 {
    if depth == 0 {
        0.0
    } else {
        (depth - 1) as f64 / depth as f64
    }
}

#[derive(Debug, Clone)]
struct Node {
    parent: Option<u32>,
    children: Vec<u32>,
    depth: u32,
    omega: f64,
    weight: f64,
}

/// The hierarchy H = (T, w): a rooted tree whose leaves carry dataset
/// vertices, with cumulative weights omega and per-node weights w.
#[derive(Debug, Clone)]
pub struct ClusterTree {
    nodes: Vec<Node>,
    leaf_of: Vec<Option<u32>>,
    id: u64,
}

impl ClusterTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.nodes[node].parent.map(|p| p as usize)
    }

    pub fn children(&self, node: usize) -> &[u32] {
        &self.nodes[node].children
    }

    pub fn depth(&self, node: usize) -> usize {
        self.nodes[node].depth as usize
    }

    pub fn omega(&self, node: usize) -> f64 {
        self.nodes[node].omega
    }

    /// w(v) = omega(v) - omega(parent(v)); for the root, omega(root).
    pub fn weight(&self, node: usize) -> f64 {
        self.nodes[node].weight
    }

    /// Leaf node holding the given dataset vertex, if covered.
    pub fn leaf_of(&self, vertex: usize) -> Option<usize> {
        self.leaf_of.get(vertex).copied().flatten().map(|n| n as usize)
    }

    /// True when every vertex in `0..n` maps to a leaf.
    pub fn covers(&self, n: usize) -> bool {
        self.leaf_of.len() >= n && self.leaf_of[..n].iter().all(|l| l.is_some())
    }

    /// Strong kernel between two covered vertices: omega of the deepest
    /// common ancestor of their leaves.
    pub fn strong_kernel(&self, x: usize, y: usize) -> Result<f64> {
        let mut a = self
            .leaf_of(x)
            .ok_or_else(|| Error::Contract(format!("vertex {x} has no leaf in the tree")))?;
        let mut b = self
            .leaf_of(y)
            .ok_or_else(|| Error::Contract(format!("vertex {y} has no leaf in the tree")))?;
        while self.depth(a) > self.depth(b) {
            a = self.parent(a).unwrap();
        }
        while self.depth(b) > self.depth(a) {
            b = self.parent(b).unwrap();
        }
        while a != b {
            a = self.parent(a).unwrap();
            b = self.parent(b).unwrap();
        }
        Ok(self.omega(a))
    }

    /// Returns a copy whose leaf mapping is composed with a vertex
    /// relabeling: vertex `map[v]` takes over old vertex `v`'s leaf. Used
    /// to carry a hierarchy across a dataset permutation.
    pub fn remap_leaves(&self, map: &[usize]) -> Result<ClusterTree> {
        if map.len() != self.leaf_of.len() {
            return Err(Error::Contract("leaf remap length mismatch".into()));
        }
        let mut leaf_of = vec![None; self.leaf_of.len()];
        for (old, &new) in map.iter().enumerate() {
            if new >= leaf_of.len() {
                return Err(Error::Contract(format!("remap target {new} out of range")));
            }
            leaf_of[new] = self.leaf_of[old];
        }
        Ok(ClusterTree { nodes: self.nodes.clone(), leaf_of, id: TREE_IDS.fetch_add(1, Ordering::Relaxed) })
    }

    /// Indented diagnostic dump: node id, depth, omega, leaf-descendant count.
    pub fn debug_dump(&self) -> String {
        let mut leaf_counts = vec![0usize; self.nodes.len()];
        for leaf in self.leaf_of.iter().flatten() {
            let mut n = *leaf as usize;
            loop {
                leaf_counts[n] += 1;
                match self.parent(n) {
                    Some(p) => n = p,
                    None => break,
                }
            }
        }
        let mut out = String::new();
        let mut stack = vec![self.root()];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            out.push_str(&"  ".repeat(node.depth as usize));
            out.push_str(&format!(
                "node {n} depth {} omega {:.4} members {}\n",
                node.depth, node.omega, leaf_counts[n]
            ));
            for &c in node.children.iter().rev() {
                stack.push(c as usize);
            }
        }
        out
    }
}

/// Incremental construction of a [`ClusterTree`]; `build` checks that omega
/// is non-decreasing along every edge.
pub struct ClusterTreeBuilder {
    nodes: Vec<Node>,
    leaves: Vec<(usize, u32)>,
}

impl ClusterTreeBuilder {
    pub fn new(root_omega: f64) -> Self {
        ClusterTreeBuilder {
            nodes: vec![Node { parent: None, children: Vec::new(), depth: 0, omega: root_omega, weight: root_omega }],
            leaves: Vec::new(),
        }
    }

    pub fn add_child(&mut self, parent: usize, omega: f64) -> usize {
        let id = self.nodes.len();
        let depth = self.nodes[parent].depth + 1;
        self.nodes[parent].children.push(id as u32);
        self.nodes.push(Node {
            parent: Some(parent as u32),
            children: Vec::new(),
            depth,
            omega,
            weight: omega - self.nodes[parent].omega,
        });
        id
    }

    /// Marks `node` as the leaf holding dataset vertex `vertex`.
    pub fn set_leaf(&mut self, vertex: usize, node: usize) {
        self.leaves.push((vertex, node as u32));
    }

    pub fn build(self) -> Result<ClusterTree> {
        for (i, node) in self.nodes.iter().enumerate() {
            if node.weight < 0.0 {
                return Err(Error::Contract(format!(
                    "omega decreases from parent to node {i} ({} -> {})",
                    self.nodes[node.parent.unwrap() as usize].omega, node.omega
                )));
            }
        }
        let max_vertex = self.leaves.iter().map(|&(v, _)| v).max();
        let mut leaf_of = vec![None; max_vertex.map_or(0, |m| m + 1)];
        for (v, n) in self.leaves {
            leaf_of[v] = Some(n);
        }
        Ok(ClusterTree { nodes: self.nodes, leaf_of, id: TREE_IDS.fetch_add(1, Ordering::Relaxed) })
    }
}

/// Kernel k-means over points addressed by id, with kernel values supplied
/// by a closure. Returns a cluster index in `0..k` per point (clusters may
/// end up empty when points coincide in kernel space). Deterministic given
/// the seed: seeding is kmeans++ over kernel-space distances, assignment
/// ties break toward the lowest cluster index, and empty clusters are
/// repaired by moving the point farthest from its own centroid unless every
/// distance is zero.
pub fn kernel_kmeans<K>(kernel: &K, points: &[usize], k: usize, seed: u64, max_iter: usize) -> Result<Vec<usize>>
where
    K: Fn(usize, usize) -> f64 + Sync,
{
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidParameter("kernel k-means needs at least one point".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("kernel k-means needs k >= 1".into()));
    }
    if k >= n {
        return Ok((0..n).collect());
    }

    let diag: Vec<f64> = points.iter().map(|&p| kernel(p, p)).collect();
    let pair_d2 = |i: usize, j: usize| -> f64 { (diag[i] + diag[j] - 2.0 * kernel(points[i], points[j])).max(0.0) };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![rng.random_range(0..n)];
    let mut seed_d2: Vec<f64> = (0..n).map(|i| pair_d2(i, centers[0])).collect();
    let mut is_center = vec![false; n];
    is_center[centers[0]] = true;
    for _ in 1..k {
        let total: f64 = seed_d2.iter().sum();
        let next = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in seed_d2.iter().enumerate() {
                acc += d;
                if acc > r {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining mass is zero: points coincide with the chosen
            // centers. Take the first free index.
            (0..n).find(|&i| !is_center[i]).unwrap()
        };
        is_center[next] = true;
        centers.push(next);
        for i in 0..n {
            seed_d2[i] = seed_d2[i].min(pair_d2(i, next));
        }
    }

    let mut assign: Vec<usize> = (0..n)
        .map(|i| {
            let mut best = 0;
            let mut best_d = pair_d2(i, centers[0]);
            for (c, &ctr) in centers.iter().enumerate().skip(1) {
                let d = pair_d2(i, ctr);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect();

    for _ in 0..max_iter {
        // Per-point sums of kernel values into each cluster: O(n^2).
        let spc: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; k];
                for j in 0..n {
                    row[assign[j]] += kernel(points[i], points[j]);
                }
                row
            })
            .collect();
        let mut counts = vec![0usize; k];
        for &a in &assign {
            counts[a] += 1;
        }
        let mut tc = vec![0.0; k];
        for i in 0..n {
            tc[assign[i]] += spc[i][assign[i]];
        }
        let dist2 = |i: usize, c: usize, counts: &[usize]| -> f64 {
            let cnt = counts[c] as f64;
            diag[i] - 2.0 * spc[i][c] / cnt + tc[c] / (cnt * cnt)
        };

        // Repair empty clusters before reassigning, using the distance of
        // every point to its current centroid.
        let own_d2: Vec<f64> = (0..n).map(|i| dist2(i, assign[i], &counts)).collect();
        let mut repaired = false;
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for i in 0..n {
                if counts[assign[i]] < 2 {
                    continue;
                }
                if best.map_or(true, |(_, bd)| own_d2[i] > bd) {
                    best = Some((i, own_d2[i]));
                }
            }
            if let Some((i, d)) = best {
                if d > 0.0 {
                    counts[assign[i]] -= 1;
                    assign[i] = c;
                    counts[c] = 1;
                    repaired = true;
                }
            }
        }
        if repaired {
            continue;
        }

        let mut changed = false;
        // Ascending scan with strict improvement: exact ties keep the
        // lowest cluster index.
        let next: Vec<usize> = (0..n)
            .map(|i| {
                let mut best = assign[i];
                let mut best_d = f64::INFINITY;
                for c in 0..k {
                    if counts[c] == 0 {
                        continue;
                    }
                    let d = dist2(i, c, &counts);
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                best
            })
            .collect();
        for i in 0..n {
            if next[i] != assign[i] {
                changed = true;
            }
        }
        assign = next;
        if !changed {
            break;
        }
    }
    Ok(assign)
}

/// Ordinary k-means on explicit feature rows; used in Nystrom mode where it
/// coincides with kernel k-means on the implied kernel. Same seeding,
/// tie-break and repair policy as [`kernel_kmeans`].
pub(crate) fn feature_kmeans(
    features: &ndarray::ArrayView2<f64>,
    points: &[usize],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidParameter("k-means needs at least one point".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k-means needs k >= 1".into()));
    }
    if k >= n {
        return Ok((0..n).collect());
    }
    let dim = features.ncols();
    let row = |i: usize| features.row(points[i]);
    let d2_to = |i: usize, center: &[f64]| -> f64 {
        row(i).iter().zip(center).map(|(&a, &b)| (a - b) * (a - b)).sum()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);
    let mut centers: Vec<Vec<f64>> = vec![row(first).to_vec()];
    let mut seed_d2: Vec<f64> = (0..n).map(|i| d2_to(i, &centers[0])).collect();
    let mut is_center = vec![false; n];
    is_center[first] = true;
    for _ in 1..k {
        let total: f64 = seed_d2.iter().sum();
        let next = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in seed_d2.iter().enumerate() {
                acc += d;
                if acc > r {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            (0..n).find(|&i| !is_center[i]).unwrap()
        };
        is_center[next] = true;
        centers.push(row(next).to_vec());
        for i in 0..n {
            seed_d2[i] = seed_d2[i].min(d2_to(i, centers.last().unwrap()));
        }
    }

    let mut assign: Vec<usize> = (0..n)
        .map(|i| {
            let mut best = 0;
            let mut best_d = d2_to(i, &centers[0]);
            for (c, ctr) in centers.iter().enumerate().skip(1) {
                let d = d2_to(i, ctr);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect();

    for _ in 0..max_iter {
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; dim]; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for (s, &x) in sums[assign[i]].iter_mut().zip(row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in &mut sums[c] {
                    *s /= counts[c] as f64;
                }
            }
        }

        let own_d2: Vec<f64> = (0..n).map(|i| d2_to(i, &sums[assign[i]])).collect();
        let mut repaired = false;
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for i in 0..n {
                if counts[assign[i]] < 2 {
                    continue;
                }
                if best.map_or(true, |(_, bd)| own_d2[i] > bd) {
                    best = Some((i, own_d2[i]));
                }
            }
            if let Some((i, d)) = best {
                if d > 0.0 {
                    counts[assign[i]] -= 1;
                    assign[i] = c;
                    counts[c] = 1;
                    repaired = true;
                }
            }
        }
        if repaired {
            continue;
        }

        let mut changed = false;
        for i in 0..n {
            let mut best = assign[i];
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                if counts[c] == 0 {
                    continue;
                }
                let d = d2_to(i, &sums[c]);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if best != assign[i] {
                changed = true;
                assign[i] = best;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(assign)
}

/// Builds the hierarchy by recursive kernel k-means over all dataset
/// vertices: the root holds everything, each node's members are split into
/// at most `branching` children down to `depth` levels, and every member
/// then becomes its own leaf child. Nodes with fewer members than the
/// branching factor stop splitting early.
pub fn build_hierarchy(state: &VertexKernelState, cfg: &HierarchyConfig, seed: u64) -> Result<ClusterTree> {
    cfg.validate()?;
    let n = state.n_vertices();
    if n == 0 {
        return Err(Error::InvalidParameter("cannot build a hierarchy over zero vertices".into()));
    }
    let mut builder = ClusterTreeBuilder::new(depth_omega(0));
    let mut queue: VecDeque<(usize, Vec<usize>, usize)> = VecDeque::new();
    queue.push_back((0, (0..n).collect(), 0));
    let mut clustering_calls = 0u64;
    while let Some((node, members, depth)) = queue.pop_front() {
        if depth == cfg.depth || members.len() < cfg.branching {
            for &v in &members {
                let leaf = builder.add_child(node, depth_omega(depth + 1));
                builder.set_leaf(v, leaf);
            }
            continue;
        }
        let call_seed = derive_seed(seed, clustering_calls);
        clustering_calls += 1;
        let labels = match state {
            VertexKernelState::Exact { matrix, .. } => {
                kernel_kmeans(&|i, j| matrix[[i, j]], &members, cfg.branching, call_seed, cfg.kmeans_max_iter)?
            }
            VertexKernelState::Nystrom { features, .. } => {
                feature_kmeans(&features.view(), &members, cfg.branching, call_seed, cfg.kmeans_max_iter)?
            }
        };
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); cfg.branching];
        for (idx, &label) in labels.iter().enumerate() {
            groups[label].push(members[idx]);
        }
        for group in groups.into_iter().filter(|g| !g.is_empty()) {
            let child = builder.add_child(node, depth_omega(depth + 1));
            queue.push_back((child, group, depth + 1));
        }
    }
    builder.build()
}

/// Sparse per-node membership counts of a vertex set: each member
/// increments every node on its leaf-to-root path.
#[derive(Debug, Clone)]
pub struct Histogram {
    tree_id: u64,
    counts: Vec<(u32, u32)>,
}

impl Histogram {
    /// Count at the root, i.e. the set size.
    pub fn total(&self) -> u32 {
        self.counts.first().map_or(0, |&(_, c)| c)
    }

    pub fn counts(&self) -> &[(u32, u32)] {
        &self.counts
    }
}

/// Builds the histogram of a vertex set over a tree.
pub fn histogram(members: &[usize], tree: &ClusterTree) -> Result<Histogram> {
    let mut counts: Vec<(u32, u32)> = Vec::with_capacity(members.len() * 2);
    let mut scratch: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
    for &v in members {
        let mut node = tree
            .leaf_of(v)
            .ok_or_else(|| Error::Contract(format!("vertex {v} has no leaf in the tree")))?;
        loop {
            *scratch.entry(node as u32).or_insert(0) += 1;
            match tree.parent(node) {
                Some(p) => node = p,
                None => break,
            }
        }
    }
    counts.extend(scratch.into_iter());
    counts.sort_unstable_by_key(|&(n, _)| n);
    Ok(Histogram { tree_id: tree.id, counts })
}

/// Optimal assignment value between two vertex sets via weighted histogram
/// intersection. Equals the maximum over all bijections of the summed
/// strong kernel, with unmatched elements of the larger set contributing
/// zero.
pub fn assignment_value(hx: &Histogram, hy: &Histogram, tree: &ClusterTree) -> Result<f64> {
    if hx.tree_id != tree.id || hy.tree_id != tree.id {
        return Err(Error::Contract("histograms built on a different tree".into()));
    }
    Ok(intersect(hx, hy, tree))
}

/// Merge-walk over the two sorted count lists.
pub(crate) fn intersect(hx: &Histogram, hy: &Histogram, tree: &ClusterTree) -> f64 {
    let (a, b) = (&hx.counts, &hy.counts);
    let mut total = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                total += tree.weight(a[i].0 as usize) * a[i].1.min(b[j].1) as f64;
                i += 1;
                j += 1;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, GraphDataset, Targets};
    use crate::params::KernelParams;
    use crate::vertex::init_state;
    use ndarray::Array2;

    #[test]
    fn omega_formula() {
        assert_eq!(depth_omega(0), 0.0);
        assert_eq!(depth_omega(1), 0.0);
        assert_eq!(depth_omega(2), 0.5);
        assert!((depth_omega(3) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(depth_omega(4), 0.75);
    }

    #[test]
    fn builder_rejects_decreasing_omega() {
        let mut b = ClusterTreeBuilder::new(0.5);
        b.add_child(0, 0.2);
        assert!(b.build().is_err());
    }

    /// Small fixed tree: root (omega 0) with two clusters (omega 0.5),
    /// leaves under them (omega 0.75).
    fn two_cluster_tree(left: &[usize], right: &[usize]) -> ClusterTree {
        let mut b = ClusterTreeBuilder::new(0.0);
        let l = b.add_child(0, 0.5);
        let r = b.add_child(0, 0.5);
        for &v in left {
            let leaf = b.add_child(l, 0.75);
            b.set_leaf(v, leaf);
        }
        for &v in right {
            let leaf = b.add_child(r, 0.75);
            b.set_leaf(v, leaf);
        }
        b.build().unwrap()
    }

    #[test]
    fn histogram_counts() {
        let tree = two_cluster_tree(&[0, 1], &[2]);
        let empty = histogram(&[], &tree).unwrap();
        assert_eq!(empty.total(), 0);

        let single = histogram(&[2], &tree).unwrap();
        // One count on each node of the leaf-to-root path.
        assert_eq!(single.counts().len(), 3);
        assert!(single.counts().iter().all(|&(_, c)| c == 1));

        let both = histogram(&[0, 1], &tree).unwrap();
        assert_eq!(both.total(), 2);
        // The shared depth-1 cluster sees both members.
        assert!(both.counts().iter().any(|&(n, c)| n == 1 && c == 2));
    }

    #[test]
    fn histogram_rejects_uncovered_vertex() {
        let tree = two_cluster_tree(&[0], &[1]);
        assert!(histogram(&[5], &tree).is_err());
    }

    #[test]
    fn assignment_self_is_maximal() {
        let tree = two_cluster_tree(&[0, 1], &[2, 3]);
        let hx = histogram(&[0, 1, 2], &tree).unwrap();
        let hy = histogram(&[1, 3], &tree).unwrap();
        let xy = assignment_value(&hx, &hy, &tree).unwrap();
        let xx = assignment_value(&hx, &hx, &tree).unwrap();
        let yy = assignment_value(&hy, &hy, &tree).unwrap();
        assert!(xy <= xx.min(yy));
        // Self-assignment sums the full leaf omegas.
        assert!((xx - 3.0 * 0.75).abs() < 1e-12);
    }

    #[test]
    fn assignment_disjoint_clusters_under_zero_root() {
        let tree = two_cluster_tree(&[0, 1], &[2, 3]);
        let hx = histogram(&[0, 1], &tree).unwrap();
        let hy = histogram(&[2, 3], &tree).unwrap();
        assert_eq!(assignment_value(&hx, &hy, &tree).unwrap(), 0.0);
    }

    #[test]
    fn assignment_one_shared_cluster() {
        // |X| = |Y| = 2 with exactly one pair meeting in a depth-1 cluster
        // of omega 0.5; the other pair only meets at the root (omega 0).
        let mut b = ClusterTreeBuilder::new(0.0);
        let c0 = b.add_child(0, 0.5);
        let c1 = b.add_child(0, 0.5);
        let c2 = b.add_child(0, 0.5);
        for (v, c) in [(0, c0), (1, c1), (2, c0), (3, c2)] {
            let leaf = b.add_child(c, 0.5);
            b.set_leaf(v, leaf);
        }
        let tree = b.build().unwrap();
        let hx = histogram(&[0, 1], &tree).unwrap();
        let hy = histogram(&[2, 3], &tree).unwrap();
        assert!((assignment_value(&hx, &hy, &tree).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn assignment_empty_set_is_zero() {
        let tree = two_cluster_tree(&[0, 1], &[2]);
        let hx = histogram(&[], &tree).unwrap();
        let hy = histogram(&[0, 1, 2], &tree).unwrap();
        assert_eq!(assignment_value(&hx, &hy, &tree).unwrap(), 0.0);
    }

    #[test]
    fn assignment_rejects_foreign_tree() {
        let t1 = two_cluster_tree(&[0], &[1]);
        let t2 = two_cluster_tree(&[0], &[1]);
        let hx = histogram(&[0], &t1).unwrap();
        let hy = histogram(&[1], &t2).unwrap();
        assert!(assignment_value(&hx, &hy, &t1).is_err());
    }

    #[test]
    fn kmeans_single_cluster() {
        let k = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let pts: Vec<usize> = (0..5).collect();
        let assign = kernel_kmeans(&k, &pts, 1, 7, 20).unwrap();
        assert!(assign.iter().all(|&a| a == 0));
    }

    #[test]
    fn kmeans_recovers_block_structure() {
        // Two groups of identical points: within-block kernel 1, across 0.
        let block = |p: usize| if p < 4 { 0 } else { 1 };
        let k = |i: usize, j: usize| if block(i) == block(j) { 1.0 } else { 0.0 };
        let pts: Vec<usize> = (0..8).collect();
        for seed in 0..5 {
            let assign = kernel_kmeans(&k, &pts, 2, seed, 30).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    assert_eq!(assign[i] == assign[j], block(i) == block(j), "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn kmeans_singletons_when_k_exceeds_points() {
        let k = |_: usize, _: usize| 1.0;
        let pts: Vec<usize> = (0..3).collect();
        assert_eq!(kernel_kmeans(&k, &pts, 5, 1, 10).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn kmeans_deterministic_given_seed() {
        let k = |i: usize, j: usize| 1.0 / (1.0 + (i as f64 - j as f64).abs());
        let pts: Vec<usize> = (0..12).collect();
        let a = kernel_kmeans(&k, &pts, 3, 42, 50).unwrap();
        let b = kernel_kmeans(&k, &pts, 3, 42, 50).unwrap();
        assert_eq!(a, b);
    }

    fn delta_dataset(labels: &[i64]) -> GraphDataset {
        let n = labels.len();
        let g = Graph::from_edges(n, &[]).unwrap().with_labels(labels.to_vec()).unwrap();
        GraphDataset::new(vec![g], Targets::None).unwrap()
    }

    #[test]
    fn hierarchy_depth_one_shape() {
        let ds = delta_dataset(&[0, 0, 1, 1, 2, 2, 3, 3]);
        let params = KernelParams { base_kernel: "delta".into(), ..Default::default() };
        let state = init_state(&ds, &params).unwrap();
        let cfg = HierarchyConfig { depth: 1, branching: 4, kmeans_max_iter: 50 };
        let tree = build_hierarchy(&state, &cfg, 3).unwrap();
        assert!(tree.covers(8));
        // Leaves live below the single clustering level.
        for v in 0..8 {
            let leaf = tree.leaf_of(v).unwrap();
            assert_eq!(tree.depth(leaf), 2);
            assert!(tree.children(leaf).is_empty());
        }
    }

    #[test]
    fn hierarchy_on_identical_vertices_gives_chain() {
        let ds = delta_dataset(&[7, 7, 7, 7]);
        let params = KernelParams { base_kernel: "delta".into(), ..Default::default() };
        let state = init_state(&ds, &params).unwrap();
        let cfg = HierarchyConfig { depth: 3, branching: 2, kmeans_max_iter: 20 };
        let tree = build_hierarchy(&state, &cfg, 11).unwrap();
        // All identical: no split ever happens, so X vs Y assignment equals
        // omega of the deepest common ancestor times min(|X|, |Y|).
        let hx = histogram(&[0, 1], &tree).unwrap();
        let hy = histogram(&[2, 3], &tree).unwrap();
        let dca_omega = tree.strong_kernel(0, 2).unwrap();
        let value = assignment_value(&hx, &hy, &tree).unwrap();
        assert!((value - dca_omega * 2.0).abs() < 1e-12);
        assert!(dca_omega > 0.0);
    }

    #[test]
    fn hierarchy_deterministic_given_seed() {
        let ds = delta_dataset(&[0, 1, 2, 0, 1, 2, 0, 1]);
        let params = KernelParams { base_kernel: "delta".into(), ..Default::default() };
        let state = init_state(&ds, &params).unwrap();
        let cfg = HierarchyConfig::default();
        let t1 = build_hierarchy(&state, &cfg, 9).unwrap();
        let t2 = build_hierarchy(&state, &cfg, 9).unwrap();
        assert_eq!(t1.n_nodes(), t2.n_nodes());
        for v in 0..8 {
            assert_eq!(t1.leaf_of(v), t2.leaf_of(v));
        }
        for n in 0..t1.n_nodes() {
            assert_eq!(t1.parent(n), t2.parent(n));
            assert_eq!(t1.omega(n), t2.omega(n));
        }
    }

    #[test]
    fn hierarchy_omega_monotone_and_weights_nonnegative() {
        let ds = delta_dataset(&[0, 1, 0, 2, 1, 0, 2, 2, 1, 0]);
        let params = KernelParams { base_kernel: "delta".into(), ..Default::default() };
        let state = init_state(&ds, &params).unwrap();
        let tree = build_hierarchy(&state, &HierarchyConfig::default(), 5).unwrap();
        for n in 0..tree.n_nodes() {
            assert!(tree.weight(n) >= 0.0);
            if let Some(p) = tree.parent(n) {
                assert!(tree.omega(n) >= tree.omega(p));
            }
        }
    }

    #[test]
    fn feature_kmeans_matches_block_structure() {
        let mut f = Array2::zeros((6, 2));
        for i in 0..3 {
            f[[i, 0]] = 10.0;
        }
        for i in 3..6 {
            f[[i, 1]] = 10.0;
        }
        let pts: Vec<usize> = (0..6).collect();
        let assign = feature_kmeans(&f.view(), &pts, 2, 4, 20).unwrap();
        assert_eq!(assign[0], assign[1]);
        assert_eq!(assign[0], assign[2]);
        assert_eq!(assign[3], assign[4]);
        assert_ne!(assign[0], assign[3]);
    }
}
