//! First-order optimizers and gradient clipping.

use std::collections::BTreeMap;

use super::store::{global_norm, GradMap, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Update rule. Hyper-parameters beyond the learning rate are fixed
/// defaults recorded in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimKind {
    /// beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    Adam,
    /// decay = 0.9, eps = 1e-8.
    RmsProp,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const RMSPROP_DECAY: f64 = 0.9;
const EPS: f64 = 1e-8;

/// Optimizer state: per-parameter moment accumulators plus a step count.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimKind,
    pub learning_rate: f64,
    pub step: u64,
    first_moment: BTreeMap<String, Tensor>,
    second_moment: BTreeMap<String, Tensor>,
}

impl Optimizer {
    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimKind::Adam,
            learning_rate,
            step: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        }
    }

    pub fn rmsprop(learning_rate: f64) -> Self {
        Self {
            kind: OptimKind::RmsProp,
            learning_rate,
            step: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        }
    }

    /// Applies one descent step for every parameter named in `grads` and
    /// bumps the store version.
    pub fn apply(&mut self, store: &mut ParamStore, grads: &GradMap) -> Result<()> {
        self.step += 1;
        for (name, g) in grads {
            let shape = store.get(name)?.shape();
            if g.shape() != shape {
                return Err(Error::Shape {
                    op: "optimizer",
                    detail: format!("grad for `{name}` is {:?}, param {:?}", g.shape(), shape),
                });
            }
            match self.kind {
                OptimKind::Adam => {
                    let m = self
                        .first_moment
                        .entry(name.clone())
                        .or_insert_with(|| Tensor::zeros(shape.0, shape.1));
                    for (mv, gv) in m.data_mut().iter_mut().zip(g.data()) {
                        *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * gv;
                    }
                    let v = self
                        .second_moment
                        .entry(name.clone())
                        .or_insert_with(|| Tensor::zeros(shape.0, shape.1));
                    for (vv, gv) in v.data_mut().iter_mut().zip(g.data()) {
                        *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * gv * gv;
                    }
                    let bias1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
                    let bias2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
                    let lr = self.learning_rate;
                    let (m, v) = (&self.first_moment[name], &self.second_moment[name]);
                    store.update(name, |p| {
                        for ((pv, mv), vv) in p.data_mut().iter_mut().zip(m.data()).zip(v.data()) {
                            let m_hat = mv / bias1;
                            let v_hat = vv / bias2;
                            *pv -= lr * m_hat / (v_hat.sqrt() + EPS);
                        }
                    })?;
                }
                OptimKind::RmsProp => {
                    let v = self
                        .second_moment
                        .entry(name.clone())
                        .or_insert_with(|| Tensor::zeros(shape.0, shape.1));
                    for (vv, gv) in v.data_mut().iter_mut().zip(g.data()) {
                        *vv = RMSPROP_DECAY * *vv + (1.0 - RMSPROP_DECAY) * gv * gv;
                    }
                    let lr = self.learning_rate;
                    let v = &self.second_moment[name];
                    store.update(name, |p| {
                        for ((pv, gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data()) {
                            *pv -= lr * gv / (vv.sqrt() + EPS);
                        }
                    })?;
                }
            }
        }
        store.bump_version();
        Ok(())
    }

    /// Serializes moments and step count as named tensors for
    /// checkpointing (`<prefix>.m.<param>`, `<prefix>.v.<param>`,
    /// `<prefix>.step`).
    pub fn export_state(&self, prefix: &str) -> Vec<(String, Tensor)> {
        let mut out = vec![(format!("{prefix}.step"), Tensor::scalar(self.step as f64))];
        for (name, t) in &self.first_moment {
            out.push((format!("{prefix}.m.{name}"), t.clone()));
        }
        for (name, t) in &self.second_moment {
            out.push((format!("{prefix}.v.{name}"), t.clone()));
        }
        out
    }

    /// Restores state exported by [`Optimizer::export_state`].
    pub fn import_state(
        &mut self,
        prefix: &str,
        entries: &BTreeMap<String, Tensor>,
    ) -> Result<()> {
        let step_key = format!("{prefix}.step");
        let step = entries
            .get(&step_key)
            .ok_or_else(|| Error::Checkpoint(format!("missing `{step_key}`")))?;
        self.step = step.item() as u64;
        self.first_moment.clear();
        self.second_moment.clear();
        let m_prefix = format!("{prefix}.m.");
        let v_prefix = format!("{prefix}.v.");
        for (name, t) in entries {
            if let Some(p) = name.strip_prefix(&m_prefix) {
                self.first_moment.insert(p.to_string(), t.clone());
            } else if let Some(p) = name.strip_prefix(&v_prefix) {
                self.second_moment.insert(p.to_string(), t.clone());
            }
        }
        Ok(())
    }
}

/// Scales all gradients by `threshold / norm` when the global L2 norm
/// exceeds the threshold; returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut GradMap, threshold: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > threshold {
        let scale = threshold / norm;
        for g in grads.values_mut() {
            g.scale_in_place(scale);
        }
    }
    norm
}
