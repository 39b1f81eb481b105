//! Instance-value estimation.
//!
//! The critic consumes the actor's first decode step on the reset state:
//! the step's pointer distribution weights the embedded inputs into one
//! width-`2D` row, which passes through the value head. For the critic's
//! own gradient the actor path is an input, not a differentiation
//! target — the two updates act on disjoint parameter sets — so the
//! weighted embedding enters the critic tape as a constant.

use crate::env::reset;
use crate::error::Result;
use crate::instances::ProblemInstance;
use crate::nncore::{lstm_cell, NodeId, ParamStore, Tape, Tensor};

use super::model::{
    decode_step, dynamic_features, embed_nodes, static_features, ActorNodes, CriticNodes,
};
use super::ModelConfig;

/// The actor-weighted embedding of the reset state, as a plain tensor.
fn weighted_embedding(
    instance: &ProblemInstance,
    store: &ParamStore,
    cfg: &ModelConfig,
) -> Result<Tensor> {
    super::check_params(store, cfg)?;
    let mut tape = Tape::new();
    let actor = ActorNodes::bind(&mut tape, store)?;
    let state = reset(instance)?;

    let sf = tape.constant(static_features(instance))?;
    let s_emb = embed_nodes(&mut tape, sf, actor.embed_static_w, actor.embed_static_b)?;
    let df = tape.constant(dynamic_features(&state))?;
    let d_emb = embed_nodes(&mut tape, df, actor.embed_dynamic_w, actor.embed_dynamic_b)?;

    let h0 = tape.constant(Tensor::zeros(1, cfg.d_model))?;
    let c0 = tape.constant(Tensor::zeros(1, cfg.d_model))?;
    let x0 = tape.row(s_emb, instance.depot_index())?;
    let (h1, _c1) = lstm_cell(&mut tape, x0, h0, c0, &actor.lstm)?;

    let mask = crate::env::feasible_mask(&state)?;
    let out = decode_step(&mut tape, &actor, s_emb, d_emb, h1, &mask)?;
    let embedded = tape.concat_cols(s_emb, d_emb)?;
    let weighted = tape.weighted_sum_rows(out.probs, embedded)?;
    Ok(tape.value(weighted).clone())
}

/// Builds `V(X0; φ)` on `tape` with the critic parameters bound as
/// leaves, returning the scalar node. Backward passes from it reach only
/// `critic.*` parameters.
pub fn critic_value_node(
    tape: &mut Tape,
    instance: &ProblemInstance,
    store: &ParamStore,
    cfg: &ModelConfig,
) -> Result<NodeId> {
    let input = weighted_embedding(instance, store, cfg)?;
    let input = tape.constant(input)?;
    let critic = CriticNodes::bind(tape, store)?;
    critic.value_head(tape, input)
}

/// `V(X0; φ)` as a plain value.
pub fn critic_value(
    instance: &ProblemInstance,
    store: &ParamStore,
    cfg: &ModelConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    let node = critic_value_node(&mut tape, instance, store, cfg)?;
    Ok(tape.value(node).item())
}
