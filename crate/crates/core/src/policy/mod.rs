//! The attention pointer policy and its critic.
//!
//! The actor has no encoder network: each node's static input (its
//! coordinates) and dynamic input (remaining demand and post-visit load)
//! pass through shared per-node affine embeddings, so the model is
//! invariant to the order of its inputs. A single-layer LSTM decoder
//! consumes the previously chosen node's static embedding; its state
//! feeds a two-stage attention head that first scores every node to form
//! a context vector and then points to the next node through a masked
//! softmax:
//!
//! ```text
//! u_i = v_aᵀ tanh(W_a [x̄_i; h])        alignment a = softmax(u)
//! c   = Σ_i a_i x̄_i                     context
//! ũ_i = v_cᵀ tanh(W_c [x̄_i; c])        P(next = i) = masked_softmax(ũ)
//! ```
//!
//! The critic scores an instance by weighting the embedded inputs with
//! the actor's first-step distribution, projecting to the model width,
//! and applying a ReLU layer plus a linear scalar head.

mod critic;
mod model;
mod rollout;

pub use critic::{critic_value, critic_value_node};
pub use model::{
    decode_step, dynamic_features, embed_nodes, static_features, ActorNodes, CriticNodes,
    DecodeOutput,
};
pub use rollout::{
    export_attention, rollout, sample_episode, write_attention, AttentionRecord, DecodeMode,
    RolloutOptions, RolloutResult, SampledEpisode,
};

use crate::error::{Error, Result};
use crate::nncore::{xavier_init, ParamStore, Tensor};
use crate::rng::{self, Domain};

/// Network width configuration. One width `D` is shared by the
/// embeddings, the decoder state, and both attention stages.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_d_model")]
    pub d_model: usize,
}

fn default_d_model() -> usize {
    128
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { d_model: default_d_model() }
    }
}

impl ModelConfig {
    pub fn with_width(d_model: usize) -> Self {
        Self { d_model }
    }

    /// Architecture object stored in checkpoint manifests.
    pub fn arch_json(&self) -> serde_json::Value {
        serde_json::json!({"d_model": self.d_model})
    }
}

/// `(name, rows, cols, xavier)` for every trainable tensor; the fixed
/// order makes seeded initialization reproducible.
fn param_specs(cfg: &ModelConfig) -> Vec<(&'static str, usize, usize, bool)> {
    let d = cfg.d_model;
    vec![
        ("actor.embed_static.w", 2, d, true),
        ("actor.embed_static.b", 1, d, false),
        ("actor.embed_dynamic.w", 2, d, true),
        ("actor.embed_dynamic.b", 1, d, false),
        ("actor.lstm.w_input", 2 * d, d, true),
        ("actor.lstm.b_input", 1, d, false),
        ("actor.lstm.w_forget", 2 * d, d, true),
        ("actor.lstm.b_forget", 1, d, false),
        ("actor.lstm.w_output", 2 * d, d, true),
        ("actor.lstm.b_output", 1, d, false),
        ("actor.lstm.w_cell", 2 * d, d, true),
        ("actor.lstm.b_cell", 1, d, false),
        ("actor.attn.w_align", 3 * d, d, true),
        ("actor.attn.v_align", d, 1, true),
        ("actor.attn.w_out", 4 * d, d, true),
        ("actor.attn.v_out", d, 1, true),
        ("critic.proj.w", 2 * d, d, true),
        ("critic.proj.b", 1, d, false),
        ("critic.hidden.w", d, d, true),
        ("critic.hidden.b", 1, d, false),
        ("critic.out.w", d, 1, true),
        ("critic.out.b", 1, 1, false),
    ]
}

/// Fresh actor and critic parameters: Xavier-initialized weights, zero
/// biases, drawn in a fixed order from one seeded stream.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> ParamStore {
    let mut rng = rng::stream(seed, Domain::Init, 0);
    let mut store = ParamStore::new();
    for (name, rows, cols, xavier) in param_specs(cfg) {
        let t = if xavier { xavier_init(rows, cols, &mut rng) } else { Tensor::zeros(rows, cols) };
        store.insert(name, t).expect("unique parameter names");
    }
    store
}

/// True for actor parameters (the policy-gradient update set).
pub fn is_actor_param(name: &str) -> bool {
    name.starts_with("actor.")
}

/// True for critic parameters (the value-regression update set).
pub fn is_critic_param(name: &str) -> bool {
    name.starts_with("critic.")
}

/// Checks that a loaded store carries exactly this configuration's
/// parameters at their expected shapes.
pub fn check_params(store: &ParamStore, cfg: &ModelConfig) -> Result<()> {
    for (name, rows, cols, _) in param_specs(cfg) {
        let t = store
            .get(name)
            .map_err(|_| Error::Checkpoint(format!("checkpoint missing parameter `{name}`")))?;
        if t.shape() != (rows, cols) {
            return Err(Error::Checkpoint(format!(
                "`{name}` has shape {:?}, expected ({rows}, {cols}) for d_model {}",
                t.shape(),
                cfg.d_model
            )));
        }
    }
    Ok(())
}
