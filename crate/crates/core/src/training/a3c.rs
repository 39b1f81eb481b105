//! Asynchronous advantage actor-critic for the stochastic dispatch
//! problem.
//!
//! The same actor and critic networks drive dispatch decisions: at every
//! epoch the available inputs are the active customers, the depot, and
//! the vehicle's current position (choosing it parks the vehicle), so
//! the action set itself encodes feasibility and no masking is needed.
//! Static features are locations; dynamic features are demand and
//! time-in-system, which lets the policy learn abandonment behavior.
//!
//! Workers run independent episodes, accumulate `Σ A_t ∇ log P(y_t)` for
//! the central actor and `Σ ∇ A_t²` for the central critic with the
//! one-step advantage `A_t = R_t + γ V(X_{t+1}) − V(X_t)` and
//! duration-normalized rewards, and the central RMSProp update fires
//! once `sync_period` episode gradients have accumulated, after which
//! workers refresh their local weights. With one worker and
//! `sync_period = 1` the trainer is a serial, reproducible actor-critic
//! loop.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;

use crate::env::{svrp_reset, svrp_step, SvrpAction, SvrpConfig, SvrpState};
use crate::error::{Error, Result};
use crate::nncore::{
    accumulate_grads, lstm_cell, save_checkpoint, GradMap, NodeId, Optimizer, ParamStore, Tape,
    Tensor,
};
use crate::policy::{
    decode_step, embed_nodes, init_params, ActorNodes, CriticNodes, ModelConfig,
};
use crate::rng::{self, Domain};

/// A3C configuration. The reference setup uses RMSProp at 1e-5 and
/// undiscounted one-step targets.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct A3cConfig {
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Episode gradients accumulated between central updates.
    #[serde(default = "default_sync")]
    pub sync_period: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    pub svrp: SvrpConfig,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default)]
    pub model: ModelConfig,
    /// Total training episodes across all workers.
    pub episodes: usize,
    /// Optional wall-clock budget; training stops at whichever limit
    /// hits first.
    #[serde(default)]
    pub wall_limit_s: Option<f64>,
    pub seed: u64,
    pub checkpoint_dir: PathBuf,
}

fn default_workers() -> usize {
    1
}
fn default_sync() -> usize {
    1
}
fn default_lr() -> f64 {
    1e-5
}
fn default_discount() -> f64 {
    1.0
}

impl A3cConfig {
    fn check(&self) -> Result<()> {
        if self.workers == 0 || self.sync_period == 0 || self.episodes == 0 {
            return Err(Error::Config("workers, sync_period, episodes must be positive".into()));
        }
        if self.lr <= 0.0 || !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::Config("lr must be positive, discount in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Node features for one dispatch state: active customers first, then
/// the depot, then the vehicle's position (the stay choice). Static
/// features are coordinates; dynamic features are scaled demand and
/// time-in-system (the depot row carries the scaled load instead).
fn svrp_features(state: &SvrpState) -> (Tensor, Tensor, usize) {
    let k = state.active.len();
    let cfg = &state.config;
    let mut stat = Vec::with_capacity((k + 2) * 2);
    let mut dyn_ = Vec::with_capacity((k + 2) * 2);
    for c in &state.active {
        stat.push(c.location.x);
        stat.push(c.location.y);
        dyn_.push(f64::from(c.demand) / f64::from(cfg.capacity));
        dyn_.push((state.clock - c.arrival_time) / cfg.patience);
    }
    stat.push(cfg.depot[0]);
    stat.push(cfg.depot[1]);
    dyn_.push(0.0);
    dyn_.push(f64::from(state.load) / f64::from(cfg.capacity));
    stat.push(state.vehicle.x);
    stat.push(state.vehicle.y);
    dyn_.push(0.0);
    dyn_.push(0.0);
    let n = k + 2;
    (
        Tensor::from_vec(n, 2, stat).expect("consistent feature count"),
        Tensor::from_vec(n, 2, dyn_).expect("consistent feature count"),
        n,
    )
}

fn index_to_action(state: &SvrpState, index: usize) -> SvrpAction {
    let k = state.active.len();
    if index < k {
        SvrpAction::Visit(state.active[index].id)
    } else if index == k {
        SvrpAction::Depot
    } else {
        SvrpAction::Stay
    }
}

/// One decode over a dispatch state: probabilities over
/// `active ∪ {depot, stay}`. The decoder input and recurrent state are
/// the caller's; passing zero state scores the state from scratch.
fn svrp_policy_step(
    tape: &mut Tape,
    actor: &ActorNodes,
    state: &SvrpState,
    h: NodeId,
    c: NodeId,
) -> Result<(NodeId, NodeId, NodeId, NodeId)> {
    let (stat, dyn_, n) = svrp_features(state);
    let sf = tape.constant(stat)?;
    let df = tape.constant(dyn_)?;
    let s_emb = embed_nodes(tape, sf, actor.embed_static_w, actor.embed_static_b)?;
    let d_emb = embed_nodes(tape, df, actor.embed_dynamic_w, actor.embed_dynamic_b)?;
    // The decoder consumes the vehicle-position embedding (the last row).
    let x = tape.row(s_emb, n - 1)?;
    let (h2, c2) = lstm_cell(tape, x, h, c, &actor.lstm)?;
    let out = decode_step(tape, actor, s_emb, d_emb, h2, &vec![true; n])?;
    let embedded = tape.concat_cols(s_emb, d_emb)?;
    let weighted = tape.weighted_sum_rows(out.probs, embedded)?;
    Ok((out.probs, h2, c2, weighted))
}

/// Greedy dispatch decision for a state under the trained policy,
/// scoring the state from a fresh decoder state. Unlike the rule
/// baselines, the policy is never forced to the depot: refilling is
/// its own decision (the depot row's dynamic feature carries the load).
pub fn svrp_decision(
    state: &SvrpState,
    store: &ParamStore,
    model: &ModelConfig,
) -> Result<SvrpAction> {
    let mut tape = Tape::new();
    let actor = ActorNodes::bind(&mut tape, store)?;
    let h0 = tape.constant(Tensor::zeros(1, model.d_model))?;
    let c0 = tape.constant(Tensor::zeros(1, model.d_model))?;
    let (probs, _, _, _) = svrp_policy_step(&mut tape, &actor, state, h0, c0)?;
    let p = tape.value(probs);
    let mut best = 0;
    for i in 1..p.rows() {
        if p.get(i, 0) > p.get(best, 0) {
            best = i;
        }
    }
    Ok(index_to_action(state, best))
}

/// Episode outcome for the policy strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEpisodeStats {
    pub satisfied_units: u64,
    pub arrived_units: u64,
}

/// Plays one full episode with greedy policy decisions; used for
/// evaluation against the rule baselines.
pub fn run_policy_episode(
    config: &SvrpConfig,
    episode: u64,
    store: &ParamStore,
    model: &ModelConfig,
) -> Result<PolicyEpisodeStats> {
    let mut state = svrp_reset(config, episode)?;
    while !state.done {
        let action = svrp_decision(&state, store, model)?;
        svrp_step(&mut state, action)?;
    }
    Ok(PolicyEpisodeStats {
        satisfied_units: state.satisfied_units,
        arrived_units: state.arrived_units,
    })
}

/// Critic value of a state as a node on `tape` (critic parameters bound
/// by the caller). The actor-weighted embedding enters as a constant.
fn svrp_value_node(
    tape: &mut Tape,
    critic: &CriticNodes,
    state: &SvrpState,
    store: &ParamStore,
    model: &ModelConfig,
) -> Result<NodeId> {
    let weighted = {
        let mut actor_tape = Tape::new();
        let actor = ActorNodes::bind(&mut actor_tape, store)?;
        let h0 = actor_tape.constant(Tensor::zeros(1, model.d_model))?;
        let c0 = actor_tape.constant(Tensor::zeros(1, model.d_model))?;
        let (_, _, _, weighted) = svrp_policy_step(&mut actor_tape, &actor, state, h0, c0)?;
        actor_tape.value(weighted).clone()
    };
    let input = tape.constant(weighted)?;
    critic.value_head(tape, input)
}

/// Gradients and stats from one sampled training episode.
struct EpisodeGrads {
    actor: GradMap,
    critic: GradMap,
    satisfied: u64,
    reward_sum: f64,
}

fn run_training_episode(
    cfg: &A3cConfig,
    store: &ParamStore,
    episode: u64,
) -> Result<EpisodeGrads> {
    let mut state = svrp_reset(&cfg.svrp, episode)?;
    let mut rng = rng::stream(cfg.seed, Domain::Rollout, episode);

    let mut actor_tape = Tape::new();
    let actor = ActorNodes::bind(&mut actor_tape, store)?;
    let mut critic_tape = Tape::new();
    let critic = CriticNodes::bind(&mut critic_tape, store)?;

    let (mut h, mut c) = {
        let h = actor_tape.constant(Tensor::zeros(1, cfg.model.d_model))?;
        let c = actor_tape.constant(Tensor::zeros(1, cfg.model.d_model))?;
        (h, c)
    };
    let mut actor_loss: Option<NodeId> = None;
    let mut critic_loss: Option<NodeId> = None;
    let mut reward_sum = 0.0;

    while !state.done {
        let (probs, h2, c2, _) = svrp_policy_step(&mut actor_tape, &actor, &state, h, c)?;
        (h, c) = (h2, c2);
        let p = actor_tape.value(probs);
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut index = p.rows() - 1;
        for i in 0..p.rows() {
            cum += p.get(i, 0);
            if u < cum {
                index = i;
                break;
            }
        }
        let picked = actor_tape.pick(probs, index)?;
        let logp = actor_tape.ln(picked)?;

        let v_t_node = svrp_value_node(&mut critic_tape, &critic, &state, store, &cfg.model)?;
        let v_t = critic_tape.value(v_t_node).item();

        let action = index_to_action(&state, index);
        let transition = svrp_step(&mut state, action)?;
        reward_sum += transition.reward;

        // Bootstrap value: zero once the transition crosses the horizon.
        let (advantage, a_node) = if transition.done {
            let a = transition.reward - v_t;
            let neg_v = critic_tape.scale(v_t_node, -1.0)?;
            (a, critic_tape.shift(neg_v, transition.reward)?)
        } else {
            let v_next_node =
                svrp_value_node(&mut critic_tape, &critic, &state, store, &cfg.model)?;
            let v_next = critic_tape.value(v_next_node).item();
            let a = transition.reward + cfg.discount * v_next - v_t;
            let scaled_next = critic_tape.scale(v_next_node, cfg.discount)?;
            let neg_v = critic_tape.scale(v_t_node, -1.0)?;
            let diff = critic_tape.add(scaled_next, neg_v)?;
            (a, critic_tape.shift(diff, transition.reward)?)
        };

        let weighted = actor_tape.scale(logp, advantage)?;
        actor_loss = Some(match actor_loss {
            None => weighted,
            Some(prev) => actor_tape.add(prev, weighted)?,
        });
        let sq = critic_tape.mul(a_node, a_node)?;
        critic_loss = Some(match critic_loss {
            None => sq,
            Some(prev) => critic_tape.add(prev, sq)?,
        });
    }

    let actor_grads = match actor_loss {
        Some(node) => actor_tape.backward(node, 1.0)?,
        None => GradMap::new(),
    };
    let critic_grads = match critic_loss {
        Some(node) => critic_tape.backward(node, 1.0)?,
        None => GradMap::new(),
    };
    Ok(EpisodeGrads {
        actor: actor_grads,
        critic: critic_grads,
        satisfied: state.satisfied_units,
        reward_sum,
    })
}

struct Central {
    store: ParamStore,
    optimizer: Optimizer,
    accum: GradMap,
    accum_count: usize,
    updates: u64,
    episodes_done: u64,
    satisfied_sum: u64,
    error: Option<Error>,
}

/// Per-episode progress row for the A3C metrics CSV.
#[derive(Debug, Clone, Copy)]
pub struct A3cMetricsRow {
    pub episode: u64,
    pub satisfied_units: u64,
    pub reward_sum: f64,
}

/// Trains the dispatch policy with A3C. `stop_check`, when given, is
/// evaluated on the central store after every central update and ends
/// training early when it returns true (the wall-clock and episode
/// budgets still apply).
pub fn a3c_train(
    cfg: &A3cConfig,
    stop_check: Option<&(dyn Fn(&ParamStore, u64) -> bool + Sync)>,
) -> Result<(ParamStore, Vec<A3cMetricsRow>)> {
    cfg.check()?;
    std::fs::create_dir_all(&cfg.checkpoint_dir)?;
    let start = Instant::now();
    let central = Mutex::new(Central {
        store: init_params(&cfg.model, cfg.seed),
        optimizer: Optimizer::rmsprop(cfg.lr),
        accum: GradMap::new(),
        accum_count: 0,
        updates: 0,
        episodes_done: 0,
        satisfied_sum: 0,
        error: None,
    });
    let next_episode = AtomicU64::new(0);
    let stop = AtomicBool::new(false);
    let metrics = Mutex::new(Vec::<A3cMetricsRow>::new());

    std::thread::scope(|scope| {
        for _ in 0..cfg.workers {
            scope.spawn(|| {
                let mut local = central.lock().expect("central lock").store.clone();
                loop {
                    if stop.load(Ordering::Relaxed) {
                        break;
                    }
                    let episode = next_episode.fetch_add(1, Ordering::Relaxed);
                    if episode >= cfg.episodes as u64 {
                        break;
                    }
                    if cfg.wall_limit_s.is_some_and(|w| start.elapsed().as_secs_f64() >= w) {
                        stop.store(true, Ordering::Relaxed);
                        break;
                    }
                    match run_training_episode(cfg, &local, episode) {
                        Err(e) => {
                            let mut c = central.lock().expect("central lock");
                            c.error.get_or_insert(e);
                            stop.store(true, Ordering::Relaxed);
                            break;
                        }
                        Ok(grads) => {
                            metrics.lock().expect("metrics lock").push(A3cMetricsRow {
                                episode,
                                satisfied_units: grads.satisfied,
                                reward_sum: grads.reward_sum,
                            });
                            let mut c = central.lock().expect("central lock");
                            accumulate_grads(&mut c.accum, &grads.actor, 1.0);
                            accumulate_grads(&mut c.accum, &grads.critic, 1.0);
                            c.accum_count += 1;
                            c.episodes_done += 1;
                            c.satisfied_sum += grads.satisfied;
                            if c.accum_count >= cfg.sync_period {
                                let accum = std::mem::take(&mut c.accum);
                                c.accum_count = 0;
                                let Central { store, optimizer, .. } = &mut *c;
                                if let Err(e) = optimizer.apply(store, &accum) {
                                    c.error.get_or_insert(e);
                                    stop.store(true, Ordering::Relaxed);
                                    break;
                                }
                                c.updates += 1;
                                if let Some(check) = stop_check {
                                    if check(&c.store, c.episodes_done) {
                                        stop.store(true, Ordering::Relaxed);
                                    }
                                }
                            }
                            local = c.store.clone();
                        }
                    }
                }
            });
        }
    });

    let central = central.into_inner().expect("central lock");
    if let Some(e) = central.error {
        // Keep whatever the central store reached for post-mortems.
        let _ = save_checkpoint(
            &central.store,
            cfg.checkpoint_dir.join("aborted"),
            &cfg.model.arch_json(),
        );
        return Err(e);
    }
    save_checkpoint(&central.store, cfg.checkpoint_dir.join("final"), &cfg.model.arch_json())?;
    let mut rows = metrics.into_inner().expect("metrics lock");
    rows.sort_by_key(|r| r.episode);
    Ok((central.store, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(dir: &std::path::Path, episodes: usize) -> A3cConfig {
        let mut svrp = SvrpConfig::with_seed(11);
        svrp.horizon = 12.0;
        A3cConfig {
            workers: 1,
            sync_period: 1,
            lr: 1e-5,
            svrp,
            discount: 1.0,
            model: ModelConfig::with_width(8),
            episodes,
            wall_limit_s: None,
            seed: 11,
            checkpoint_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn serial_training_is_reproducible() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let (store_a, rows_a) = a3c_train(&tiny_cfg(dir_a.path(), 4), None).unwrap();
        let (store_b, rows_b) = a3c_train(&tiny_cfg(dir_b.path(), 4), None).unwrap();
        assert_eq!(store_a, store_b);
        assert_eq!(rows_a.len(), rows_b.len());
        for (a, b) in rows_a.iter().zip(&rows_b) {
            assert_eq!(a.satisfied_units, b.satisfied_units);
            assert_eq!(a.reward_sum.to_bits(), b.reward_sum.to_bits());
        }
    }

    #[test]
    fn policy_episodes_run_under_untrained_weights() {
        let cfg = ModelConfig::with_width(8);
        let store = init_params(&cfg, 3);
        let mut svrp = SvrpConfig::with_seed(5);
        svrp.horizon = 15.0;
        let stats = run_policy_episode(&svrp, 0, &store, &cfg).unwrap();
        assert!(stats.arrived_units > 0);
    }

    #[test]
    fn multi_worker_training_completes() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(dir.path(), 6);
        cfg.workers = 2;
        cfg.sync_period = 2;
        let (store, rows) = a3c_train(&cfg, None).unwrap();
        assert!(!rows.is_empty());
        crate::policy::check_params(&store, &cfg.model).unwrap();
    }

    #[test]
    fn stop_check_ends_training_early() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(dir.path(), 1000);
        let (_store, rows) = a3c_train(&cfg, Some(&|_: &ParamStore, done| done >= 2)).unwrap();
        assert!(rows.len() < 1000);
    }
}
