//! Tape-level forward passes: embeddings, the decode step, and the
//! parameter bindings they read.

use crate::env::CvrpState;
use crate::error::Result;
use crate::instances::{Kind, ProblemInstance};
use crate::nncore::{LstmParams, NodeId, ParamStore, Tape, Tensor};

/// Actor parameters bound onto one tape.
#[derive(Debug, Clone, Copy)]
pub struct ActorNodes {
    pub embed_static_w: NodeId,
    pub embed_static_b: NodeId,
    pub embed_dynamic_w: NodeId,
    pub embed_dynamic_b: NodeId,
    pub lstm: LstmParams,
    pub w_align: NodeId,
    pub v_align: NodeId,
    pub w_out: NodeId,
    pub v_out: NodeId,
}

impl ActorNodes {
    pub fn bind(tape: &mut Tape, store: &ParamStore) -> Result<Self> {
        let mut p = |name: &str| -> Result<NodeId> { tape.param(name, store.get(name)?.clone()) };
        Ok(Self {
            embed_static_w: p("actor.embed_static.w")?,
            embed_static_b: p("actor.embed_static.b")?,
            embed_dynamic_w: p("actor.embed_dynamic.w")?,
            embed_dynamic_b: p("actor.embed_dynamic.b")?,
            lstm: LstmParams {
                w_input: p("actor.lstm.w_input")?,
                b_input: p("actor.lstm.b_input")?,
                w_forget: p("actor.lstm.w_forget")?,
                b_forget: p("actor.lstm.b_forget")?,
                w_output: p("actor.lstm.w_output")?,
                b_output: p("actor.lstm.b_output")?,
                w_cell: p("actor.lstm.w_cell")?,
                b_cell: p("actor.lstm.b_cell")?,
            },
            w_align: p("actor.attn.w_align")?,
            v_align: p("actor.attn.v_align")?,
            w_out: p("actor.attn.w_out")?,
            v_out: p("actor.attn.v_out")?,
        })
    }
}

/// Critic parameters bound onto one tape.
#[derive(Debug, Clone, Copy)]
pub struct CriticNodes {
    pub proj_w: NodeId,
    pub proj_b: NodeId,
    pub hidden_w: NodeId,
    pub hidden_b: NodeId,
    pub out_w: NodeId,
    pub out_b: NodeId,
}

impl CriticNodes {
    pub fn bind(tape: &mut Tape, store: &ParamStore) -> Result<Self> {
        let mut p = |name: &str| -> Result<NodeId> { tape.param(name, store.get(name)?.clone()) };
        Ok(Self {
            proj_w: p("critic.proj.w")?,
            proj_b: p("critic.proj.b")?,
            hidden_w: p("critic.hidden.w")?,
            hidden_b: p("critic.hidden.b")?,
            out_w: p("critic.out.w")?,
            out_b: p("critic.out.b")?,
        })
    }

    /// The scalar value head over a width-`2D` input row.
    pub fn value_head(&self, tape: &mut Tape, input: NodeId) -> Result<NodeId> {
        let projected = tape.affine(input, self.proj_w, self.proj_b)?;
        let pre = tape.affine(projected, self.hidden_w, self.hidden_b)?;
        let hidden = tape.relu(pre)?;
        tape.affine(hidden, self.out_w, self.out_b)
    }
}

/// Static per-node features: coordinates, customers first, depot last
/// for CVRP. `[n_nodes, 2]`.
pub fn static_features(instance: &ProblemInstance) -> Tensor {
    let mut data = Vec::with_capacity(instance.n_nodes() * 2);
    for c in &instance.customers {
        data.push(c.location.x);
        data.push(c.location.y);
    }
    if instance.kind == Kind::Cvrp {
        let depot = instance.depot.expect("cvrp instance has a depot");
        data.push(depot.x);
        data.push(depot.y);
    }
    Tensor::from_vec(instance.n_nodes(), 2, data).expect("consistent feature count")
}

/// Dynamic per-node features for a CVRP state: remaining demand and the
/// load left after a full visit, both scaled by capacity. The depot row
/// carries `(0, load)`. `[n_customers + 1, 2]`.
pub fn dynamic_features(state: &CvrpState) -> Tensor {
    let cap = f64::from(state.capacity);
    let load = f64::from(state.load);
    let mut data = Vec::with_capacity((state.remaining_demand.len() + 1) * 2);
    for &d in &state.remaining_demand {
        let d = f64::from(d);
        data.push(d / cap);
        data.push((load - d) / cap);
    }
    data.push(0.0);
    data.push(load / cap);
    Tensor::from_vec(state.remaining_demand.len() + 1, 2, data).expect("consistent feature count")
}

/// Shared affine embedding of a `[n, 2]` feature matrix to `[n, D]`.
pub fn embed_nodes(
    tape: &mut Tape,
    features: NodeId,
    w: NodeId,
    b: NodeId,
) -> Result<NodeId> {
    tape.affine(features, w, b)
}

/// Outputs of one decode step.
#[derive(Debug, Clone, Copy)]
pub struct DecodeOutput {
    /// Alignment vector over nodes (unmasked softmax), `[n, 1]`.
    pub alignment: NodeId,
    /// Pointer distribution over nodes (masked), `[n, 1]`.
    pub probs: NodeId,
}

/// The two-stage attention head: alignment from the decoder state, a
/// context vector from the alignment, and the masked pointer
/// distribution from the context.
pub fn decode_step(
    tape: &mut Tape,
    actor: &ActorNodes,
    static_emb: NodeId,
    dynamic_emb: NodeId,
    h: NodeId,
    mask: &[bool],
) -> Result<DecodeOutput> {
    let embedded = tape.concat_cols(static_emb, dynamic_emb)?; // [n, 2D]
    let with_state = tape.concat_cols_broadcast(embedded, h)?; // [n, 3D]
    let scores = {
        let t = tape.matmul(with_state, actor.w_align)?;
        let t = tape.tanh(t)?;
        tape.matmul(t, actor.v_align)? // [n, 1]
    };
    let all = vec![true; mask.len()];
    let alignment = tape.masked_softmax(scores, &all)?;
    let context = tape.weighted_sum_rows(alignment, embedded)?; // [1, 2D]
    let with_context = tape.concat_cols_broadcast(embedded, context)?; // [n, 4D]
    let out_scores = {
        let t = tape.matmul(with_context, actor.w_out)?;
        let t = tape.tanh(t)?;
        tape.matmul(t, actor.v_out)?
    };
    let probs = tape.masked_softmax(out_scores, mask)?;
    Ok(DecodeOutput { alignment, probs })
}
