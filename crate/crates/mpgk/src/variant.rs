//! Variant registry: the four kernel variants are pairs of interchangeable
//! set-kernel strategies, one comparing neighborhoods during message
//! passing and one comparing whole graphs. `R` stands for the
//! R-convolution sum, `A` for the optimal assignment kernel; the two-letter
//! code (RR, RA, AR, AA) names neighborhood then graph strategy, and is
//! looked up at runtime from config or the CLI.

use crate::error::{Error, Result};
use crate::gram::{gram_assign, gram_rconv, GramMatrix};
use crate::graph::GraphDataset;
use crate::hierarchy::build_hierarchy;
use crate::params::{derive_seed, KernelParams};
use crate::vertex::{assign_update, neighborhood_hierarchy_seed, rr_update, VertexKernelState};

const GRAPH_HIERARCHY_TAG: u64 = 0x4752_4148;

/// Seed used for the hierarchy behind the graph-level assignment kernel at
/// iteration `t`. Exposed so reference implementations can rebuild the
/// identical tree.
pub fn graph_hierarchy_seed(params_seed: u64, t: usize) -> u64 {
    derive_seed(params_seed, GRAPH_HIERARCHY_TAG ^ (t as u64) << 8)
}

/// Strategy updating the vertex kernel from one iteration to the next.
pub trait NeighborhoodAggregator: Send + Sync {
    fn code(&self) -> char;
    fn name(&self) -> &'static str;
    fn update(&self, state: &VertexKernelState, ds: &GraphDataset, params: &KernelParams) -> Result<VertexKernelState>;
}

/// Strategy aggregating a vertex kernel state into a graph-level Gram.
pub trait GraphAggregator: Send + Sync {
    fn code(&self) -> char;
    fn name(&self) -> &'static str;
    fn gram(&self, state: &VertexKernelState, ds: &GraphDataset, params: &KernelParams) -> Result<GramMatrix>;
}

pub struct RConvNeighborhood;

impl NeighborhoodAggregator for RConvNeighborhood {
    fn code(&self) -> char {
        'R'
    }

    fn name(&self) -> &'static str {
        "r-convolution"
    }

    fn update(&self, state: &VertexKernelState, ds: &GraphDataset, params: &KernelParams) -> Result<VertexKernelState> {
        rr_update(state, ds, params.alpha, params.beta)
    }
}

/// Builds a fresh hierarchy from the state being updated, then applies the
/// assignment neighborhood kernel.
pub struct AssignmentNeighborhood;

impl NeighborhoodAggregator for AssignmentNeighborhood {
    fn code(&self) -> char {
        'A'
    }

    fn name(&self) -> &'static str {
        "assignment"
    }

    fn update(&self, state: &VertexKernelState, ds: &GraphDataset, params: &KernelParams) -> Result<VertexKernelState> {
        let seed = neighborhood_hierarchy_seed(params.seed, state.iteration());
        let tree = build_hierarchy(state, &params.hierarchy, seed)?;
        assign_update(state, ds, params.alpha, params.beta, &tree)
    }
}

pub struct RConvGraph;

impl GraphAggregator for RConvGraph {
    fn code(&self) -> char {
        'R'
    }

    fn name(&self) -> &'static str {
        "r-convolution"
    }

    fn gram(&self, state: &VertexKernelState, ds: &GraphDataset, _params: &KernelParams) -> Result<GramMatrix> {
        gram_rconv(state, ds)
    }
}

/// Builds a hierarchy from the final state ("the last time step") and
/// evaluates the graph-level assignment kernel against it.
pub struct AssignmentGraph;

impl GraphAggregator for AssignmentGraph {
    fn code(&self) -> char {
        'A'
    }

    fn name(&self) -> &'static str {
        "assignment"
    }

    fn gram(&self, state: &VertexKernelState, ds: &GraphDataset, params: &KernelParams) -> Result<GramMatrix> {
        let seed = graph_hierarchy_seed(params.seed, state.iteration());
        let tree = build_hierarchy(state, &params.hierarchy, seed)?;
        gram_assign(state, ds, &tree)
    }
}

/// One registered variant: a neighborhood strategy paired with a graph
/// strategy.
pub struct Variant {
    pub code: &'static str,
    pub neighborhood: &'static dyn NeighborhoodAggregator,
    pub graph: &'static dyn GraphAggregator,
}

static VARIANTS: [Variant; 4] = [
    Variant { code: "RR", neighborhood: &RConvNeighborhood, graph: &RConvGraph },
    Variant { code: "RA", neighborhood: &RConvNeighborhood, graph: &AssignmentGraph },
    Variant { code: "AR", neighborhood: &AssignmentNeighborhood, graph: &RConvGraph },
    Variant { code: "AA", neighborhood: &AssignmentNeighborhood, graph: &AssignmentGraph },
];

/// All registered variants, in registry order.
pub fn all() -> &'static [Variant] {
    &VARIANTS
}

/// Looks a variant up by its two-letter code, case-insensitively.
pub fn lookup(code: &str) -> Result<&'static Variant> {
    VARIANTS
        .iter()
        .find(|v| v.code.eq_ignore_ascii_case(code))
        .ok_or_else(|| Error::Config(format!("unknown variant '{code}' (expected RR, RA, AR or AA)")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!(lookup("rr").unwrap().code, "RR");
        assert_eq!(lookup("Aa").unwrap().code, "AA");
        assert!(lookup("XX").is_err());
    }

    #[test]
    fn codes_match_strategies() {
        for v in all() {
            assert_eq!(v.code.chars().next().unwrap(), v.neighborhood.code());
            assert_eq!(v.code.chars().nth(1).unwrap(), v.graph.code());
        }
    }
}
