//! Episode drivers: greedy decoding, distribution sampling, and beam
//! search, plus the tape-building sampler the trainer differentiates
//! through.
//!
//! All drivers share one tape per episode. Decoding starts by feeding
//! the depot's static embedding to the decoder; afterwards the
//! previously chosen node's static embedding. Greedy takes the argmax
//! (ties to the lowest node index); beam search keeps the `width`
//! highest cumulative-log-probability partial sequences, collects
//! completed ones, and returns the completed tour of minimum length.

use std::time::Instant;

use rand::Rng;

use super::model::{
    decode_step, dynamic_features, embed_nodes, static_features, ActorNodes, DecodeOutput,
};
use super::ModelConfig;
use crate::env::{feasible_mask, reset, step, CvrpState, Solution};
use crate::error::{Error, Result};
use crate::instances::ProblemInstance;
use crate::nncore::{lstm_cell, NodeId, ParamStore, Tape, Tensor};

/// Decoding strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Sample,
    Beam(usize),
}

impl DecodeMode {
    fn tag(self, split_mode: bool) -> String {
        let sd = if split_mode { "sd-" } else { "" };
        match self {
            Self::Greedy => format!("rl-{sd}greedy"),
            Self::Sample => format!("rl-{sd}sample"),
            Self::Beam(w) => format!("rl-{sd}bs({w})"),
        }
    }
}

/// Options for [`rollout`].
#[derive(Debug, Clone)]
pub struct RolloutOptions {
    pub mode: DecodeMode,
    /// Inference disables dropout regardless of the probability.
    pub inference: bool,
    /// Dropout probability on the decoder state when not inferring.
    pub dropout: f64,
    pub split_mode: bool,
    /// Capture the per-step pointer distributions.
    pub emit_distributions: bool,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self {
            mode: DecodeMode::Greedy,
            inference: true,
            dropout: 0.0,
            split_mode: false,
            emit_distributions: false,
        }
    }
}

impl RolloutOptions {
    pub fn greedy() -> Self {
        Self::default()
    }

    pub fn beam(width: usize) -> Self {
        Self { mode: DecodeMode::Beam(width), ..Self::default() }
    }

    pub fn sampling() -> Self {
        Self { mode: DecodeMode::Sample, ..Self::default() }
    }

    pub fn with_split(mut self, split: bool) -> Self {
        self.split_mode = split;
        self
    }
}

/// A decoded episode.
#[derive(Debug, Clone)]
pub struct RolloutResult {
    pub solution: Solution,
    /// False when the step cap cut the episode short (possible only in
    /// split mode under a poor policy).
    pub completed: bool,
    pub step_distributions: Option<Vec<Vec<f64>>>,
}

/// A sampled episode with its tape, ready for a policy-gradient
/// backward pass from `log_prob`.
pub struct SampledEpisode {
    pub tape: Tape,
    /// Sum of the chosen actions' log-probabilities.
    pub log_prob: NodeId,
    pub result: RolloutResult,
}

struct EpisodeCtx {
    cfg: ModelConfig,
    actor: ActorNodes,
    static_emb: NodeId,
    depot: usize,
}

impl EpisodeCtx {
    fn new(
        tape: &mut Tape,
        instance: &ProblemInstance,
        store: &ParamStore,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        super::check_params(store, cfg)?;
        let actor = ActorNodes::bind(tape, store)?;
        let features = tape.constant(static_features(instance))?;
        let static_emb =
            embed_nodes(tape, features, actor.embed_static_w, actor.embed_static_b)?;
        Ok(Self { cfg: *cfg, actor, static_emb, depot: instance.depot_index() })
    }

    fn zero_state(&self, tape: &mut Tape) -> Result<(NodeId, NodeId)> {
        let h = tape.constant(Tensor::zeros(1, self.cfg.d_model))?;
        let c = tape.constant(Tensor::zeros(1, self.cfg.d_model))?;
        Ok((h, c))
    }

    /// Advances the decoder by one step: LSTM on the last chosen node's
    /// static embedding, optional dropout, then the attention head.
    fn policy_step<R: Rng>(
        &self,
        tape: &mut Tape,
        last_node: usize,
        h: NodeId,
        c: NodeId,
        state: &CvrpState,
        dropout: f64,
        rng: Option<&mut R>,
    ) -> Result<(DecodeOutput, NodeId, NodeId, Vec<bool>)> {
        let x = tape.row(self.static_emb, last_node)?;
        let (mut h2, c2) = lstm_cell(tape, x, h, c, &self.actor.lstm)?;
        if dropout > 0.0 {
            let rng = rng.expect("dropout requires an rng");
            let keep = 1.0 / (1.0 - dropout);
            let scales: Vec<f64> = (0..self.cfg.d_model)
                .map(|_| if rng.gen::<f64>() < dropout { 0.0 } else { keep })
                .collect();
            h2 = tape.dropout(h2, scales)?;
        }
        let df = tape.constant(dynamic_features(state))?;
        let d_emb =
            embed_nodes(tape, df, self.actor.embed_dynamic_w, self.actor.embed_dynamic_b)?;
        let mask = feasible_mask(state)?;
        let out = decode_step(tape, &self.actor, self.static_emb, d_emb, h2, &mask)?;
        Ok((out, h2, c2, mask))
    }
}

fn greedy_index(probs: &Tensor, mask: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_p = f64::NEG_INFINITY;
    for (i, &m) in mask.iter().enumerate() {
        if m && probs.get(i, 0) > best_p {
            best_p = probs.get(i, 0);
            best = i;
        }
    }
    best
}

fn sample_index<R: Rng>(probs: &Tensor, mask: &[bool], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last = 0;
    for (i, &m) in mask.iter().enumerate() {
        if m {
            last = i;
            cum += probs.get(i, 0);
            if u < cum {
                return i;
            }
        }
    }
    last
}

/// Samples one episode on a fresh tape. `dropout > 0` applies decoder
/// dropout driven by `rng` (training rollouts); pass 0 for evaluation.
pub fn sample_episode<R: Rng>(
    instance: &ProblemInstance,
    store: &ParamStore,
    cfg: &ModelConfig,
    split_mode: bool,
    dropout: f64,
    rng: &mut R,
) -> Result<SampledEpisode> {
    let start = Instant::now();
    let mut tape = Tape::new();
    let ctx = EpisodeCtx::new(&mut tape, instance, store, cfg)?;
    let mut state = reset(instance)?;
    state.split_mode = split_mode;
    let (mut h, mut c) = ctx.zero_state(&mut tape)?;
    let mut last = ctx.depot;
    let mut log_prob: Option<NodeId> = None;
    let mut per_step = Vec::new();
    let mut dists = Vec::new();
    let cap = state.step_cap();
    let mut completed = true;

    loop {
        let (out, h2, c2, mask) =
            ctx.policy_step(&mut tape, last, h, c, &state, dropout, Some(rng))?;
        (h, c) = (h2, c2);
        let action = sample_index(tape.value(out.probs), &mask, rng);
        dists.push(tape.value(out.probs).data().to_vec());
        let picked = tape.pick(out.probs, action)?;
        let lp = tape.ln(picked)?;
        per_step.push(tape.value(lp).item());
        log_prob = Some(match log_prob {
            None => lp,
            Some(prev) => tape.add(prev, lp)?,
        });
        let done = step(&mut state, action)?;
        if done {
            break;
        }
        if state.step >= cap {
            completed = false;
            break;
        }
        last = action;
    }

    let mut solution = Solution::from_sequence(
        instance,
        DecodeMode::Sample.tag(split_mode),
        state.sequence,
        start.elapsed().as_secs_f64(),
    )?;
    solution.per_step_logprob = per_step;
    solution.split_mode = split_mode;
    Ok(SampledEpisode {
        tape,
        log_prob: log_prob.expect("episodes decode at least one step"),
        result: RolloutResult { solution, completed, step_distributions: Some(dists) },
    })
}

struct Beam {
    state: CvrpState,
    h: NodeId,
    c: NodeId,
    last: usize,
    log_prob: f64,
    per_step: Vec<f64>,
}

struct Completed {
    sequence: Vec<usize>,
    length: f64,
    per_step: Vec<f64>,
}

/// Decodes an instance under the given options. Sampling obeys `rng`;
/// greedy and beam decoding ignore it.
pub fn rollout<R: Rng>(
    instance: &ProblemInstance,
    store: &ParamStore,
    cfg: &ModelConfig,
    opts: &RolloutOptions,
    rng: &mut R,
) -> Result<RolloutResult> {
    let dropout = if opts.inference { 0.0 } else { opts.dropout };
    match opts.mode {
        DecodeMode::Sample => {
            let mut episode =
                sample_episode(instance, store, cfg, opts.split_mode, dropout, rng)?;
            if !opts.emit_distributions {
                episode.result.step_distributions = None;
            }
            Ok(episode.result)
        }
        DecodeMode::Greedy => beam_rollout(instance, store, cfg, 1, opts, rng),
        DecodeMode::Beam(width) => {
            if width == 0 {
                return Err(Error::Config("beam width must be at least 1".into()));
            }
            beam_rollout(instance, store, cfg, width, opts, rng)
        }
    }
}

fn beam_rollout<R: Rng>(
    instance: &ProblemInstance,
    store: &ParamStore,
    cfg: &ModelConfig,
    width: usize,
    opts: &RolloutOptions,
    rng: &mut R,
) -> Result<RolloutResult> {
    let start = Instant::now();
    let dropout = if opts.inference { 0.0 } else { opts.dropout };
    let mut tape = Tape::new();
    let ctx = EpisodeCtx::new(&mut tape, instance, store, cfg)?;
    let (h0, c0) = ctx.zero_state(&mut tape)?;
    let mut root = reset(instance)?;
    root.split_mode = opts.split_mode;
    let cap = root.step_cap();

    let mut live = vec![Beam {
        state: root,
        h: h0,
        c: c0,
        last: ctx.depot,
        log_prob: 0.0,
        per_step: Vec::new(),
    }];
    let mut completed: Vec<Completed> = Vec::new();
    let mut dists = Vec::new();

    while !live.is_empty() && completed.len() < width {
        // (cumulative log-prob, source beam, action, h', c', step prob)
        let mut candidates: Vec<(f64, usize, usize, NodeId, NodeId, f64)> = Vec::new();
        for (b_idx, beam) in live.iter().enumerate() {
            let (out, h2, c2, mask) = ctx.policy_step(
                &mut tape,
                beam.last,
                beam.h,
                beam.c,
                &beam.state,
                dropout,
                Some(rng),
            )?;
            if opts.emit_distributions && b_idx == 0 {
                dists.push(tape.value(out.probs).data().to_vec());
            }
            let probs = tape.value(out.probs);
            for (action, &feasible) in mask.iter().enumerate() {
                if feasible {
                    let p = probs.get(action, 0);
                    candidates.push((beam.log_prob + p.ln(), b_idx, action, h2, c2, p));
                }
            }
        }
        candidates.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
        });

        let mut next: Vec<Beam> = Vec::with_capacity(width);
        for (log_prob, b_idx, action, h2, c2, p) in candidates {
            if completed.len() + next.len() >= width {
                break;
            }
            let src = &live[b_idx];
            let mut state = src.state.clone();
            let done = step(&mut state, action)?;
            let mut per_step = src.per_step.clone();
            per_step.push(p.ln());
            if done {
                let length = crate::env::tour_length(instance, &state.sequence)?;
                completed.push(Completed { sequence: state.sequence, length, per_step });
            } else if state.step < cap {
                next.push(Beam { state, h: h2, c: c2, last: action, log_prob, per_step });
            }
        }
        live = next;
    }

    let tag = match width {
        1 => DecodeMode::Greedy.tag(opts.split_mode),
        w => DecodeMode::Beam(w).tag(opts.split_mode),
    };
    let wall = start.elapsed().as_secs_f64();
    let best = completed
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.length.total_cmp(&b.length))
        .map(|(i, _)| i);
    match best {
        Some(i) => {
            let chosen = completed.swap_remove(i);
            let mut solution = Solution::from_sequence(instance, tag, chosen.sequence, wall)?;
            solution.per_step_logprob = chosen.per_step;
            solution.split_mode = opts.split_mode;
            Ok(RolloutResult {
                solution,
                completed: true,
                step_distributions: opts.emit_distributions.then_some(dists),
            })
        }
        None => {
            // Every beam hit the step cap; report the root's partial path.
            let mut solution = Solution::from_sequence(instance, tag, vec![ctx.depot], wall)?;
            solution.split_mode = opts.split_mode;
            Ok(RolloutResult {
                solution,
                completed: false,
                step_distributions: opts.emit_distributions.then_some(dists),
            })
        }
    }
}

/// One decoding step's attention data.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AttentionRecord {
    pub step: usize,
    /// Alignment vector (pre-mask attention weights), sums to 1.
    pub a_t: Vec<f64>,
    /// Pointer distribution (masked), sums to 1 over feasible nodes.
    pub p_t: Vec<f64>,
    pub chosen: usize,
}

/// Greedy-decodes an instance, capturing each step's alignment vector
/// and pointer distribution, up to `max_steps` if given.
pub fn export_attention(
    instance: &ProblemInstance,
    store: &ParamStore,
    cfg: &ModelConfig,
    max_steps: Option<usize>,
) -> Result<Vec<AttentionRecord>> {
    let mut tape = Tape::new();
    let ctx = EpisodeCtx::new(&mut tape, instance, store, cfg)?;
    let mut state = reset(instance)?;
    let (mut h, mut c) = ctx.zero_state(&mut tape)?;
    let mut last = ctx.depot;
    let mut records = Vec::new();
    let cap = state.step_cap();

    loop {
        if max_steps.is_some_and(|m| records.len() >= m) {
            break;
        }
        let (out, h2, c2, mask) = ctx.policy_step(
            &mut tape,
            last,
            h,
            c,
            &state,
            0.0,
            None::<&mut rand_chacha::ChaCha8Rng>,
        )?;
        (h, c) = (h2, c2);
        let action = greedy_index(tape.value(out.probs), &mask);
        records.push(AttentionRecord {
            step: records.len(),
            a_t: tape.value(out.alignment).data().to_vec(),
            p_t: tape.value(out.probs).data().to_vec(),
            chosen: action,
        });
        let done = step(&mut state, action)?;
        if done || state.step >= cap {
            break;
        }
        last = action;
    }
    Ok(records)
}

/// Writes attention records as JSON Lines `{step, a_t, p_t, chosen}`.
pub fn write_attention<P: AsRef<std::path::Path>>(
    path: P,
    records: &[AttentionRecord],
) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)
            .map_err(|e| Error::Parse { line: 0, detail: e.to_string() })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::validate_solution;
    use crate::instances::{generate_instance_at, GeneratorConfig};
    use crate::policy::init_params;
    use crate::rng::{stream, Domain};

    fn setup(seed: u64) -> (ProblemInstance, ParamStore, ModelConfig) {
        let cfg = ModelConfig::with_width(16);
        let store = init_params(&cfg, seed);
        let inst = generate_instance_at(&GeneratorConfig::new(10, 20, seed), 0).unwrap();
        (inst, store, cfg)
    }

    #[test]
    fn untrained_greedy_rollouts_are_feasible() {
        for seed in 0..20 {
            let (inst, store, cfg) = setup(seed);
            let mut rng = stream(seed, Domain::Rollout, 0);
            let r = rollout(&inst, &store, &cfg, &RolloutOptions::greedy(), &mut rng).unwrap();
            assert!(r.completed);
            let report = validate_solution(&inst, &r.solution.sequence, false).unwrap();
            assert!(report.feasible, "{:?}", report.violations);
        }
    }

    #[test]
    fn beam_width_one_equals_greedy() {
        for seed in 0..10 {
            let (inst, store, cfg) = setup(seed);
            let mut rng = stream(seed, Domain::Rollout, 1);
            let g = rollout(&inst, &store, &cfg, &RolloutOptions::greedy(), &mut rng).unwrap();
            let b = rollout(&inst, &store, &cfg, &RolloutOptions::beam(1), &mut rng).unwrap();
            assert_eq!(g.solution.sequence, b.solution.sequence);
        }
    }

    #[test]
    fn beam_returns_shortest_completed_candidate() {
        let (inst, store, cfg) = setup(3);
        let mut rng = stream(3, Domain::Rollout, 2);
        let b10 = rollout(&inst, &store, &cfg, &RolloutOptions::beam(10), &mut rng).unwrap();
        let b1 = rollout(&inst, &store, &cfg, &RolloutOptions::beam(1), &mut rng).unwrap();
        assert!(b10.solution.total_length <= b1.solution.total_length + 1e-12);
        let report = validate_solution(&inst, &b10.solution.sequence, false).unwrap();
        assert!(report.feasible);
    }

    #[test]
    fn sampling_is_reproducible_per_seed() {
        let (inst, store, cfg) = setup(5);
        let run = || {
            let mut rng = stream(5, Domain::Rollout, 7);
            rollout(&inst, &store, &cfg, &RolloutOptions::sampling(), &mut rng)
                .unwrap()
                .solution
                .sequence
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn sampled_log_probs_recompute_via_forced_replay() {
        // Eq-1 consistency: the emitted per-step log-probs must match an
        // independent re-evaluation of the same action sequence.
        let (inst, store, cfg) = setup(6);
        let mut rng = stream(6, Domain::Rollout, 3);
        let episode = sample_episode(&inst, &store, &cfg, false, 0.0, &mut rng).unwrap();
        let actions: Vec<usize> = episode.result.solution.sequence[1..]
            .iter()
            .copied()
            .collect();

        let mut tape = Tape::new();
        let ctx = EpisodeCtx::new(&mut tape, &inst, &store, &cfg).unwrap();
        let mut state = reset(&inst).unwrap();
        let (mut h, mut c) = ctx.zero_state(&mut tape).unwrap();
        let mut last = ctx.depot;
        let mut total = 0.0;
        let mut step_idx = 0;
        for &action in &actions {
            let (out, h2, c2, _mask) = ctx
                .policy_step(&mut tape, last, h, c, &state, 0.0, None::<&mut rand_chacha::ChaCha8Rng>)
                .unwrap();
            (h, c) = (h2, c2);
            total += tape.value(out.probs).get(action, 0).ln();
            let done = step(&mut state, action).unwrap();
            step_idx += 1;
            if done {
                break;
            }
            last = action;
        }
        assert_eq!(step_idx, episode.result.solution.per_step_logprob.len());
        let emitted = episode.result.solution.log_prob();
        assert!((emitted - total).abs() < 1e-9, "{emitted} vs {total}");
        // The tape's accumulated node agrees too.
        let node_val = episode.tape.value(episode.log_prob).item();
        assert!((node_val - total).abs() < 1e-9);
    }

    #[test]
    fn attention_rows_are_distributions() {
        let (inst, store, cfg) = setup(8);
        let records = export_attention(&inst, &store, &cfg, None).unwrap();
        assert!(!records.is_empty());
        for r in &records {
            let sa: f64 = r.a_t.iter().sum();
            let sp: f64 = r.p_t.iter().sum();
            assert!((sa - 1.0).abs() < 1e-9);
            assert!((sp - 1.0).abs() < 1e-9);
            assert!(r.a_t.iter().all(|&v| v > 0.0), "alignment is unmasked");
        }
        // Step 0 at the depot: the depot itself must carry zero pointer mass.
        assert_eq!(records[0].p_t[inst.depot_index()], 0.0);
    }

    #[test]
    fn relocating_a_customer_changes_the_first_distribution() {
        let (inst, store, cfg) = setup(9);
        let base = export_attention(&inst, &store, &cfg, Some(1)).unwrap();
        let mut moved = inst.clone();
        moved.customers[0].location = crate::instances::Coord::new(0.01, 0.99);
        let shifted = export_attention(&moved, &store, &cfg, Some(1)).unwrap();
        assert_ne!(base[0].p_t, shifted[0].p_t);
    }
}
