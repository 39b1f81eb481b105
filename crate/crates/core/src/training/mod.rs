//! Policy-gradient training and evaluation.
//!
//! [`reinforce_train`] follows the batch recipe: sample `N` instances,
//! roll each out by sampling the policy, and descend on
//! `(1/N) Σ (Rⁿ − V(X₀ⁿ)) ∇ log P(Yⁿ)` for the actor and
//! `(1/N) Σ ∇ (Rⁿ − V)²` for the critic, with per-network global-norm
//! clipping and Adam. Rollouts within a batch may run on a thread pool;
//! per-instance gradients are reduced in instance order, so results are
//! identical in single-threaded and parallel mode.

pub mod a3c;

pub use a3c::{a3c_train, run_policy_episode, svrp_decision, A3cConfig};

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::env::Solution;
use crate::error::{Error, Result};
use crate::instances::{generate_instance_at, GeneratorConfig, ProblemInstance};
use crate::nncore::{
    accumulate_grads, clip_global_norm, load_checkpoint_expecting, save_checkpoint, GradMap,
    Optimizer, ParamStore, Tensor,
};
use crate::policy::{
    critic_value, critic_value_node, init_params, rollout, sample_episode, DecodeMode,
    ModelConfig, RolloutOptions,
};
use crate::rng::{self, Domain};

/// REINFORCE configuration. Defaults mirror the reference setup: batch
/// 128, Adam at 1e-4 for both networks, gradient clip 2.0, decoder
/// dropout 0.1.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_lr")]
    pub lr_actor: f64,
    #[serde(default = "default_lr")]
    pub lr_critic: f64,
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    pub epochs: usize,
    pub instances_per_epoch: usize,
    pub problem: GeneratorConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    pub seed: u64,
    pub checkpoint_dir: PathBuf,
    /// Worker threads for batch rollouts; 0 uses the global pool, 1 is
    /// the serial mode. Results are identical either way.
    #[serde(default)]
    pub threads: usize,
    /// Resume from a training checkpoint stem written by a previous run.
    #[serde(default)]
    pub resume_from: Option<PathBuf>,
}

fn default_batch() -> usize {
    128
}
fn default_lr() -> f64 {
    1e-4
}
fn default_clip() -> f64 {
    2.0
}
fn default_dropout() -> f64 {
    0.1
}
fn default_eval_every() -> usize {
    100
}

impl TrainConfig {
    pub fn iterations(&self) -> usize {
        self.epochs * self.instances_per_epoch / self.batch
    }

    fn check(&self) -> Result<()> {
        if self.batch == 0 || self.epochs == 0 || self.instances_per_epoch == 0 {
            return Err(Error::Config("batch, epochs, instances_per_epoch must be positive".into()));
        }
        if self.lr_actor <= 0.0 || self.lr_critic <= 0.0 || self.clip_norm <= 0.0 {
            return Err(Error::Config("learning rates and clip_norm must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One training iteration's summary statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_advantage: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    /// Actor gradient norm before clipping.
    pub grad_norm_pre_clip: f64,
    pub wall_s: f64,
}

/// Append-only metrics trace, written as CSV.
#[derive(Debug, Clone, Default)]
pub struct TrainMetrics {
    pub rows: Vec<IterationMetrics>,
}

impl TrainMetrics {
    pub fn push(&mut self, row: IterationMetrics) {
        debug_assert!(self.rows.last().is_none_or(|r| r.iteration < row.iteration));
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,mean_reward,actor_loss,critic_loss,grad_norm_pre_clip,wall_s\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.iteration, r.mean_reward, r.actor_loss, r.critic_loss, r.grad_norm_pre_clip, r.wall_s
            ));
        }
        out
    }

    pub fn write_csv<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Per-batch gradient statistics.
#[derive(Debug, Clone, Copy)]
pub struct BatchStats {
    pub mean_reward: f64,
    pub mean_advantage: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
}

/// Computes batch-averaged actor and critic gradients for a set of
/// instances: one sampled rollout per instance (rng stream per
/// `stream_base + index`), reward = tour length (the step-cap penalty
/// for incomplete episodes), advantage against the critic value.
///
/// The batch gradient is by construction the average of the single-
/// instance gradients.
pub fn batch_gradients(
    instances: &[ProblemInstance],
    store: &ParamStore,
    cfg: &TrainConfig,
    stream_base: u64,
) -> Result<(GradMap, GradMap, BatchStats)> {
    struct PerInstance {
        actor: GradMap,
        critic: GradMap,
        reward: f64,
        advantage: f64,
        actor_loss: f64,
        critic_loss: f64,
    }

    let run_one = |(idx, instance): (usize, &ProblemInstance)| -> Result<PerInstance> {
        let mut rng = rng::stream(cfg.seed, Domain::Rollout, stream_base + idx as u64);
        let episode =
            sample_episode(instance, store, &cfg.model, false, cfg.dropout, &mut rng)?;
        let reward = if episode.result.completed {
            episode.result.solution.total_length
        } else {
            crate::env::reset(instance)?.penalty_length()
        };
        let value = critic_value(instance, store, &cfg.model)?;
        let advantage = reward - value;
        let actor = episode.tape.backward(episode.log_prob, advantage)?;

        let mut critic_tape = crate::nncore::Tape::new();
        let v_node = critic_value_node(&mut critic_tape, instance, store, &cfg.model)?;
        let diff = critic_tape.shift(v_node, -reward)?;
        let loss = critic_tape.mul(diff, diff)?;
        let critic = critic_tape.backward(loss, 1.0)?;

        Ok(PerInstance {
            actor,
            critic,
            reward,
            advantage,
            actor_loss: advantage * episode.tape.value(episode.log_prob).item(),
            critic_loss: advantage * advantage,
        })
    };

    let per_instance: Vec<PerInstance> = if cfg.threads == 1 {
        instances.iter().enumerate().map(run_one).collect::<Result<_>>()?
    } else {
        instances.par_iter().enumerate().map(run_one).collect::<Result<_>>()?
    };

    let scale = 1.0 / instances.len() as f64;
    let mut actor = GradMap::new();
    let mut critic = GradMap::new();
    let mut stats =
        BatchStats { mean_reward: 0.0, mean_advantage: 0.0, actor_loss: 0.0, critic_loss: 0.0 };
    for p in &per_instance {
        accumulate_grads(&mut actor, &p.actor, scale);
        accumulate_grads(&mut critic, &p.critic, scale);
        stats.mean_reward += scale * p.reward;
        stats.mean_advantage += scale * p.advantage;
        stats.actor_loss += scale * p.actor_loss;
        stats.critic_loss += scale * p.critic_loss;
    }
    Ok((actor, critic, stats))
}

/// Trainer state bundled for checkpointing: parameters, both optimizer
/// states, and the iteration counter.
fn save_train_checkpoint(
    store: &ParamStore,
    opt_actor: &Optimizer,
    opt_critic: &Optimizer,
    iteration: usize,
    cfg: &TrainConfig,
    stem: &std::path::Path,
) -> Result<()> {
    let mut full = store.clone();
    for (name, t) in opt_actor.export_state("opt.actor") {
        full.insert(name, t)?;
    }
    for (name, t) in opt_critic.export_state("opt.critic") {
        full.insert(name, t)?;
    }
    full.insert("train.iteration", Tensor::scalar(iteration as f64))?;
    save_checkpoint(&full, stem, &cfg.model.arch_json())
}

fn load_train_checkpoint(
    stem: &std::path::Path,
    cfg: &TrainConfig,
) -> Result<(ParamStore, Optimizer, Optimizer, usize)> {
    let (full, _arch) = load_checkpoint_expecting(stem, &cfg.model.arch_json())?;
    let mut params = ParamStore::new();
    let mut extras = std::collections::BTreeMap::new();
    for (name, t) in full.iter() {
        if name.starts_with("opt.") || name.starts_with("train.") {
            extras.insert(name.clone(), t.clone());
        } else {
            params.insert(name.clone(), t.clone())?;
        }
    }
    crate::policy::check_params(&params, &cfg.model)?;
    let mut opt_actor = Optimizer::adam(cfg.lr_actor);
    let mut opt_critic = Optimizer::adam(cfg.lr_critic);
    opt_actor.import_state("opt.actor", &extras)?;
    opt_critic.import_state("opt.critic", &extras)?;
    let iteration = extras
        .get("train.iteration")
        .ok_or_else(|| Error::Checkpoint("missing `train.iteration`".into()))?
        .item() as usize;
    Ok((params, opt_actor, opt_critic, iteration))
}

/// Runs REINFORCE with a critic baseline. Returns the trained store and
/// the per-iteration metrics; checkpoints land in `checkpoint_dir`
/// (`ckpt_<iter>` on the eval cadence, `final` at the end) together with
/// `metrics.csv`.
pub fn reinforce_train(cfg: &TrainConfig) -> Result<(ParamStore, TrainMetrics)> {
    cfg.check()?;
    std::fs::create_dir_all(&cfg.checkpoint_dir)?;
    let (mut store, mut opt_actor, mut opt_critic, start_iter) = match &cfg.resume_from {
        Some(stem) => load_train_checkpoint(stem, cfg)?,
        None => (
            init_params(&cfg.model, cfg.seed),
            Optimizer::adam(cfg.lr_actor),
            Optimizer::adam(cfg.lr_critic),
            0,
        ),
    };

    let pool = (cfg.threads > 1)
        .then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))
        })
        .transpose()?;

    let mut metrics = TrainMetrics::default();
    let iterations = cfg.iterations();
    for iter in start_iter..iterations {
        let t0 = Instant::now();
        let instances: Vec<ProblemInstance> = (0..cfg.batch)
            .map(|n| generate_instance_at(&cfg.problem, (iter * cfg.batch + n) as u64))
            .collect::<Result<_>>()?;
        let stream_base = (iter * cfg.batch) as u64;
        let run = || batch_gradients(&instances, &store, cfg, stream_base);
        let (mut actor, mut critic, stats) = match &pool {
            Some(p) => p.install(run)?,
            None => run()?,
        };

        if !(stats.actor_loss.is_finite() && stats.critic_loss.is_finite()) {
            return Err(Error::NumericHealth {
                context: format!("training loss at iteration {iter}"),
            });
        }
        let grad_norm_pre_clip = clip_global_norm(&mut actor, cfg.clip_norm);
        clip_global_norm(&mut critic, cfg.clip_norm);
        opt_actor.apply(&mut store, &actor)?;
        opt_critic.apply(&mut store, &critic)?;

        metrics.push(IterationMetrics {
            iteration: iter,
            mean_reward: stats.mean_reward,
            mean_advantage: stats.mean_advantage,
            actor_loss: stats.actor_loss,
            critic_loss: stats.critic_loss,
            grad_norm_pre_clip,
            wall_s: t0.elapsed().as_secs_f64(),
        });

        if (iter + 1) % cfg.eval_every == 0 {
            let stem = cfg.checkpoint_dir.join(format!("ckpt_{:06}", iter + 1));
            save_train_checkpoint(&store, &opt_actor, &opt_critic, iter + 1, cfg, &stem)?;
            metrics.write_csv(cfg.checkpoint_dir.join("metrics.csv"))?;
        }
    }
    save_train_checkpoint(
        &store,
        &opt_actor,
        &opt_critic,
        iterations,
        cfg,
        &cfg.checkpoint_dir.join("final"),
    )?;
    metrics.write_csv(cfg.checkpoint_dir.join("metrics.csv"))?;
    Ok((store, metrics))
}

/// Evaluation summary over a test set.
#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub solutions: Vec<Solution>,
    pub mean_length: f64,
    pub std_length: f64,
    pub mean_wall_s: f64,
}

impl EvalSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance_id,solver,length,wall_s,feasible\n");
        for s in &self.solutions {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.instance_id, s.solver_tag, s.total_length, s.wall_time_s, true
            ));
        }
        out
    }
}

/// Decodes every instance under one mode and summarizes lengths.
/// Deterministic given the parameters, mode, and seed.
pub fn evaluate(
    store: &ParamStore,
    model: &ModelConfig,
    instances: &[ProblemInstance],
    mode: DecodeMode,
    split_mode: bool,
    seed: u64,
) -> Result<EvalSummary> {
    if instances.is_empty() {
        return Err(Error::Bench("empty test set".into()));
    }
    crate::policy::check_params(store, model)?;
    let opts = RolloutOptions { mode, split_mode, ..RolloutOptions::default() };
    let solutions: Vec<Solution> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let mut rng = rng::stream(seed, Domain::Rollout, i as u64);
            rollout(inst, store, model, &opts, &mut rng).map(|r| r.solution)
        })
        .collect::<Result<_>>()?;
    let n = solutions.len() as f64;
    let mean_length = solutions.iter().map(|s| s.total_length).sum::<f64>() / n;
    let var = solutions
        .iter()
        .map(|s| (s.total_length - mean_length).powi(2))
        .sum::<f64>()
        / n;
    let mean_wall_s = solutions.iter().map(|s| s.wall_time_s).sum::<f64>() / n;
    Ok(EvalSummary { solutions, mean_length, std_length: var.sqrt(), mean_wall_s })
}
