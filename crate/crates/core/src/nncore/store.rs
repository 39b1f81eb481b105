//! Named parameter storage.

use std::collections::BTreeMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Gradients keyed by parameter name. Ordered so that flattening (for
/// norms, clipping, updates) is deterministic.
pub type GradMap = BTreeMap<String, Tensor>;

/// All trainable weights, keyed by name, plus a version counter that
/// identifies the snapshot a worker read. Shapes are fixed at insertion.
/// Equality compares the parameters only; the version is runtime
/// bookkeeping and is not persisted.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
    version: u64,
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::Config(format!("parameter `{name}` already exists")));
        }
        self.params.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total scalar parameter count.
    pub fn n_values(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn bump_version(&mut self) {
        self.version += 1;
    }

    /// In-place update of one parameter; the shape is immutable.
    pub fn update(&mut self, name: &str, f: impl FnOnce(&mut Tensor)) -> Result<()> {
        let t = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter `{name}`")))?;
        let shape = t.shape();
        f(t);
        if t.shape() != shape {
            return Err(Error::Shape { op: "update", detail: format!("`{name}` shape changed") });
        }
        Ok(())
    }

    /// Replaces a parameter's values with a same-shaped tensor.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let t = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter `{name}`")))?;
        if t.shape() != value.shape() {
            return Err(Error::Shape {
                op: "set",
                detail: format!("`{name}` expects {:?}, got {:?}", t.shape(), value.shape()),
            });
        }
        *t = value;
        Ok(())
    }
}

/// `into += alpha * grads` accumulating by name, creating zero tensors on
/// first sight.
pub fn accumulate_grads(into: &mut GradMap, grads: &GradMap, alpha: f64) {
    for (name, g) in grads {
        into.entry(name.clone())
            .or_insert_with(|| Tensor::zeros(g.rows(), g.cols()))
            .axpy(alpha, g);
    }
}

/// Global L2 norm across every tensor in the map.
pub fn global_norm(grads: &GradMap) -> f64 {
    grads.values().map(Tensor::norm_sq).sum::<f64>().sqrt()
}
