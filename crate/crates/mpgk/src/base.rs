//! Base vertex kernels: the iteration-0 similarity between two vertices.
//!
//! Each kernel is a strategy behind the [`BaseKernel`] trait, registered by
//! name and selected at runtime. `delta` compares discrete labels, `linear`
//! takes the dot product of attribute vectors, `delta_plus_linear` sums the
//! two, and `degree` is the linear kernel on the vertex degree (the
//! unlabeled-graph initializer).

use crate::error::{Error, Result};
use crate::graph::GraphDataset;

/// A positive semidefinite kernel on dataset vertices, addressed by global
/// vertex id.
pub trait BaseKernel: Send + Sync {
    fn name(&self) -> &'static str;

    /// Verifies the dataset carries the data this kernel reads.
    fn check(&self, ds: &GraphDataset) -> Result<()>;

    /// Kernel value between two vertices. Callers must run [`check`]
    /// (or go through [`crate::vertex::init_state`]) first.
    ///
    /// [`check`]: BaseKernel::check
    fn eval(&self, ds: &GraphDataset, u: usize, v: usize) -> f64;
}

/// 1 if the discrete labels are equal, 0 otherwise.
pub struct DeltaKernel;

impl BaseKernel for DeltaKernel {
    fn name(&self) -> &'static str {
        "delta"
    }

    fn check(&self, ds: &GraphDataset) -> Result<()> {
        if !ds.has_labels() {
            return Err(Error::Config("delta base kernel requires vertex labels".into()));
        }
        Ok(())
    }

    fn eval(&self, ds: &GraphDataset, u: usize, v: usize) -> f64 {
        if ds.vertex_label(u) == ds.vertex_label(v) {
            1.0
        } else {
            0.0
        }
    }
}

/// Dot product of the vertices' attribute vectors.
pub struct LinearKernel;

impl BaseKernel for LinearKernel {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn check(&self, ds: &GraphDataset) -> Result<()> {
        if !ds.has_attributes() {
            return Err(Error::Config("linear base kernel requires vertex attributes".into()));
        }
        Ok(())
    }

    fn eval(&self, ds: &GraphDataset, u: usize, v: usize) -> f64 {
        let a = ds.vertex_attribute(u).expect("checked attributes");
        let b = ds.vertex_attribute(v).expect("checked attributes");
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
}

/// Sum of the delta and linear kernels, for datasets carrying both labels
/// and attributes.
pub struct DeltaPlusLinearKernel;

impl BaseKernel for DeltaPlusLinearKernel {
    fn name(&self) -> &'static str {
        "delta_plus_linear"
    }

    fn check(&self, ds: &GraphDataset) -> Result<()> {
        DeltaKernel.check(ds)?;
        LinearKernel.check(ds)
    }

    fn eval(&self, ds: &GraphDataset, u: usize, v: usize) -> f64 {
        DeltaKernel.eval(ds, u, v) + LinearKernel.eval(ds, u, v)
    }
}

/// Product of the vertex degrees: the linear kernel on a degree attribute,
/// usable on graphs with no labels or attributes.
pub struct DegreeKernel;

impl BaseKernel for DegreeKernel {
    fn name(&self) -> &'static str {
        "degree"
    }

    fn check(&self, _ds: &GraphDataset) -> Result<()> {
        Ok(())
    }

    fn eval(&self, ds: &GraphDataset, u: usize, v: usize) -> f64 {
        ds.global_degree(u) as f64 * ds.global_degree(v) as f64
    }
}

static REGISTRY: [&'static dyn BaseKernel; 4] =
    [&DeltaKernel, &LinearKernel, &DeltaPlusLinearKernel, &DegreeKernel];

/// Looks a base kernel up by name (case-insensitive; hyphens allowed in
/// place of underscores).
pub fn by_name(name: &str) -> Result<&'static dyn BaseKernel> {
    let normalized = name.to_ascii_lowercase().replace('-', "_");
    REGISTRY
        .iter()
        .copied()
        .find(|k| k.name() == normalized)
        .ok_or_else(|| Error::Config(format!("unknown base kernel '{name}' (expected one of {:?})", names())))
}

pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|k| k.name()).collect()
}

/// Picks the default base kernel for whatever data the dataset carries.
pub fn auto_for(ds: &GraphDataset) -> &'static dyn BaseKernel {
    match (ds.has_labels(), ds.has_attributes()) {
        (true, true) => &DeltaPlusLinearKernel,
        (true, false) => &DeltaKernel,
        (false, true) => &LinearKernel,
        (false, false) => &DegreeKernel,
    }
}
