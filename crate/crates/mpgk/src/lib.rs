//! Message passing graph kernels.
//!
//! Vertex similarities are propagated for T iterations: each step combines
//! a vertex pair's current kernel value with a set kernel over their
//! neighborhoods, either the R-convolution double sum or a valid optimal
//! assignment kernel under a clustering hierarchy. The per-iteration vertex
//! kernels are then aggregated into graph-level Gram matrices by the same
//! two set-kernel choices, giving four variants (RR, RA, AR, AA) selected
//! by name at runtime.
//!
//! Both levels support exact dense computation and Nystrom low-rank
//! approximation. On top of the kernels sit kernel PCA node embedding, a
//! precomputed-kernel SVM with repeated stratified cross-validation, and
//! CSV import/export of TU-format datasets, Gram matrices and feature
//! matrices.

pub mod base;
pub mod error;
pub mod eval;
pub mod gram;
pub mod graph;
pub mod hierarchy;
pub mod io;
pub mod linalg;
pub mod params;
pub mod reference;
pub mod svm;
pub mod synth;
pub mod variant;
pub mod vertex;

pub use error::{Error, Result};
pub use eval::{cross_validate, CvConfig, CvReport, FoldOutcome};
pub use gram::{compute_grams, gram_assign, gram_rconv, graph_nystrom_features, normalize, GramMatrix};
pub use graph::{make_barbell, validate, Graph, GraphDataset, Targets, Violation};
pub use hierarchy::{
    assignment_value, build_hierarchy, depth_omega, histogram, kernel_kmeans, ClusterTree, ClusterTreeBuilder,
    Histogram,
};
pub use linalg::{kernel_pca, kernel_pca_with, nystrom_fit, nystrom_fit_from_blocks, sym_eig, EigenResult};
pub use params::{HierarchyConfig, KernelParams, LandmarkSpec};
pub use svm::{svm_train, MulticlassSvm, SvmModel};
pub use vertex::{
    assign_update, init_state, init_state_with_landmarks, rr_update, run_message_passing,
    run_message_passing_traced, VertexKernelState,
};
