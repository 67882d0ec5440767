//! Shared helpers for the integration test suites.
#![allow(dead_code)]

use mpgk::hierarchy::{ClusterTree, ClusterTreeBuilder};
use mpgk::synth::{random_dataset, SynthSpec};
use mpgk::{GraphDataset, KernelParams};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs()))
}

pub fn frobenius_rel_err(approx: &Array2<f64>, exact: &Array2<f64>) -> f64 {
    let num: f64 = approx
        .iter()
        .zip(exact.iter())
        .map(|(&a, &e)| (a - e) * (a - e))
        .sum::<f64>()
        .sqrt();
    let den: f64 = exact.iter().map(|&e| e * e).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// A small random dataset whose data kind cycles with the seed: labels
/// only, attributes only, or both.
pub fn small_dataset(seed: u64) -> (GraphDataset, &'static str) {
    let (n_labels, attr_dim, base) = match seed % 3 {
        0 => (Some(3), None, "delta"),
        1 => (None, Some(2), "linear"),
        _ => (Some(2), Some(2), "delta_plus_linear"),
    };
    let spec = SynthSpec {
        n_graphs: 3 + (seed % 6) as usize,
        min_vertices: 3,
        max_vertices: 7,
        edge_prob: 0.45,
        n_labels,
        attr_dim,
        n_classes: None,
        seed,
    };
    (random_dataset(&spec), base)
}

pub fn params_for(base: &str, variant: &str, iterations: usize, seed: u64) -> KernelParams {
    KernelParams {
        base_kernel: base.into(),
        variant: variant.into(),
        iterations,
        seed,
        hierarchy: mpgk::HierarchyConfig { depth: 3, branching: 3, kmeans_max_iter: 30 },
        ..Default::default()
    }
}

/// Random hierarchy over vertices `0..n_vertices`: a tree grown
/// breadth-first with random fan-out and non-decreasing omega, every
/// vertex mapped to a uniformly chosen node.
pub fn random_tree(rng: &mut ChaCha8Rng, n_vertices: usize) -> ClusterTree {
    let mut builder = ClusterTreeBuilder::new(0.0);
    let mut frontier = vec![(0usize, 0.0f64)];
    let mut all_nodes = vec![0usize];
    for _depth in 0..3 {
        let mut next = Vec::new();
        for &(node, omega) in &frontier {
            let fanout = rng.random_range(0..=3);
            for _ in 0..fanout {
                let child_omega = omega + rng.random_range(0.0..0.5);
                let child = builder.add_child(node, child_omega);
                all_nodes.push(child);
                next.push((child, child_omega));
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    for v in 0..n_vertices {
        let node = all_nodes[rng.random_range(0..all_nodes.len())];
        builder.set_leaf(v, node);
    }
    builder.build().expect("random omegas are non-decreasing by construction")
}

/// Uniformly random subset of `0..n` with the given size (without
/// replacement).
pub fn random_subset(rng: &mut ChaCha8Rng, n: usize, size: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, n, size.min(n)).into_vec()
}

/// Asserts the acceptance-level Gram contract: symmetry within 1e-9 and
/// minimum eigenvalue >= -1e-8 * lambda_max.
pub fn assert_gram_contract(values: &Array2<f64>, context: &str) {
    let sym = mpgk::linalg::symmetry_error(&values.view());
    assert!(sym <= 1e-9, "{context}: symmetry error {sym:.3e}");
    let eig = mpgk::sym_eig(&values.view()).expect("gram should be factorable");
    let max = eig.eigenvalues[0].abs();
    let min = *eig.eigenvalues.last().unwrap();
    assert!(min >= -1e-8 * max.max(f64::MIN_POSITIVE), "{context}: min eigenvalue {min:.3e} vs max {max:.3e}");
}
