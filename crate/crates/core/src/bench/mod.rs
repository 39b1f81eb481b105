//! Benchmark harness: run a roster of solvers over a common instance
//! set, collect per-row results, and derive summary tables, win-rate
//! matrices, optimality-gap distributions, and dispatch-strategy
//! comparisons.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::env::{tour_length, validate_solution, SvrpConfig};
use crate::error::{Error, Result};
use crate::heuristics::{
    clarke_wright, cvrp_exact, run_rule_episode, sweep, sweep_basic, CwConfig, RuleKind,
};
use crate::instances::{generate_batch, read_instances, GeneratorConfig, ProblemInstance};
use crate::nncore::{load_checkpoint_expecting, ParamStore};
use crate::policy::{rollout, DecodeMode, ModelConfig, RolloutOptions};
use crate::rng::{self, Domain};
use crate::training::run_policy_episode;

/// Where benchmark instances come from.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    /// JSON-Lines instance file.
    Path { path: PathBuf },
    /// Freshly generated set.
    Generator { generator: GeneratorConfig, count: usize },
}

impl InstanceSource {
    pub fn load(&self) -> Result<Vec<ProblemInstance>> {
        match self {
            Self::Path { path } => read_instances(path),
            Self::Generator { generator, count } => generate_batch(generator, *count),
        }
    }
}

/// Decoder choice for learned solvers, mirrored in config files as
/// `"greedy"`, `"sample"`, or `{"beam": width}`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RlMode {
    Greedy,
    Sample,
    Beam(usize),
}

impl From<RlMode> for DecodeMode {
    fn from(m: RlMode) -> Self {
        match m {
            RlMode::Greedy => DecodeMode::Greedy,
            RlMode::Sample => DecodeMode::Sample,
            RlMode::Beam(w) => DecodeMode::Beam(w),
        }
    }
}

/// One solver in the roster.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolverSpec {
    /// Clarke-Wright savings; `r = m = 1` is the greedy heuristic.
    Cw {
        #[serde(default = "one")]
        r: usize,
        #[serde(default = "one")]
        m: usize,
    },
    /// Sweep from angle zero.
    SweepBasic,
    /// Sweep over `r` random initial angles.
    SweepRnd { r: usize },
    /// Exact oracle (at most 12 customers).
    Exact,
    /// Learned policy from a checkpoint.
    Rl {
        mode: RlMode,
        checkpoint: PathBuf,
        #[serde(default)]
        split: bool,
        #[serde(default)]
        model: ModelConfig,
    },
}

fn one() -> usize {
    1
}

impl SolverSpec {
    pub fn tag(&self) -> String {
        match self {
            Self::Cw { r, m } => CwConfig::randomized(*r, *m, 0).tag(),
            Self::SweepBasic => "sw-basic".into(),
            Self::SweepRnd { r } => format!("sw-rnd({r})"),
            Self::Exact => "exact".into(),
            Self::Rl { mode, split, .. } => {
                let sd = if *split { "sd-" } else { "" };
                match mode {
                    RlMode::Greedy => format!("rl-{sd}greedy"),
                    RlMode::Sample => format!("rl-{sd}sample"),
                    RlMode::Beam(w) => format!("rl-{sd}bs({w})"),
                }
            }
        }
    }
}

/// Benchmark configuration (JSON mirrors the fields).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BenchConfig {
    pub instances: InstanceSource,
    pub solvers: Vec<SolverSpec>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

/// One (instance, solver) outcome. `length` is absent when the solver
/// failed on the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub instance_id: String,
    pub solver: String,
    pub length: Option<f64>,
    pub wall_s: f64,
    pub feasible: bool,
}

/// Per-solver aggregate over its successful rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSummary {
    pub solver: String,
    pub mean: f64,
    pub std: f64,
    pub mean_wall_s: f64,
    pub solved: usize,
    pub failed: usize,
}

/// Full benchmark output.
#[derive(Debug, Clone)]
pub struct BenchResults {
    pub rows: Vec<BenchRow>,
    pub summaries: Vec<SolverSummary>,
}

impl BenchResults {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("instance_id,solver,length,wall_s,feasible\n");
        for r in &self.rows {
            let length = r.length.map_or(String::new(), |l| l.to_string());
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.instance_id, r.solver, length, r.wall_s, r.feasible
            ));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("solver,mean,std,mean_wall_s,solved,failed\n");
        for s in &self.summaries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.solver, s.mean, s.std, s.mean_wall_s, s.solved, s.failed
            ));
        }
        out
    }
}

fn solve_one(
    spec: &SolverSpec,
    loaded: Option<&(ParamStore, ModelConfig)>,
    instance: &ProblemInstance,
    index: usize,
    seed: u64,
) -> Result<crate::env::Solution> {
    match spec {
        SolverSpec::Cw { r, m } => {
            clarke_wright(instance, &CwConfig::randomized(*r, *m, seed.wrapping_add(index as u64)))
        }
        SolverSpec::SweepBasic => sweep_basic(instance),
        SolverSpec::SweepRnd { r } => sweep(instance, *r, seed.wrapping_add(index as u64)),
        SolverSpec::Exact => cvrp_exact(instance),
        SolverSpec::Rl { mode, split, .. } => {
            let (store, model) = loaded.expect("checkpoint loaded before solving");
            let opts = RolloutOptions {
                mode: (*mode).into(),
                split_mode: *split,
                ..RolloutOptions::default()
            };
            let mut rng = rng::stream(seed, Domain::Rollout, index as u64);
            let run = rollout(instance, store, model, &opts, &mut rng)?;
            if !run.completed {
                return Err(Error::Bench("rollout hit the step cap".into()));
            }
            Ok(run.solution)
        }
    }
}

/// Runs every solver over every instance. Solver errors flag the row
/// and the run continues; rows are sorted by `(instance_id, solver)`.
/// Writes `results.csv` and `summary.csv` under the output directory.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResults> {
    if cfg.solvers.is_empty() {
        return Err(Error::Bench("no solvers configured".into()));
    }
    let instances = cfg.instances.load()?;
    if instances.is_empty() {
        return Err(Error::Bench("empty instance set".into()));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;

    let mut rows = Vec::with_capacity(instances.len() * cfg.solvers.len());
    let mut summaries = Vec::with_capacity(cfg.solvers.len());
    for spec in &cfg.solvers {
        let loaded = match spec {
            SolverSpec::Rl { checkpoint, model, .. } => {
                let (store, _) = load_checkpoint_expecting(checkpoint, &model.arch_json())?;
                // Training checkpoints carry optimizer state next to the
                // policy parameters; only the policy subset is needed.
                let mut params = ParamStore::new();
                for (name, t) in store.iter() {
                    if crate::policy::is_actor_param(name) || crate::policy::is_critic_param(name)
                    {
                        params.insert(name.clone(), t.clone())?;
                    }
                }
                crate::policy::check_params(&params, model)?;
                Some((params, *model))
            }
            _ => None,
        };
        let split = matches!(spec, SolverSpec::Rl { split: true, .. });
        let solver_rows: Vec<BenchRow> = instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| match solve_one(spec, loaded.as_ref(), inst, i, cfg.seed) {
                Ok(sol) => {
                    let recomputed = tour_length(inst, &sol.sequence).unwrap_or(f64::NAN);
                    let consistent = (recomputed - sol.total_length).abs() < 1e-9;
                    let feasible = consistent
                        && validate_solution(inst, &sol.sequence, split)
                            .map(|r| r.feasible)
                            .unwrap_or(false);
                    BenchRow {
                        instance_id: inst.id.clone(),
                        solver: sol.solver_tag,
                        length: Some(sol.total_length),
                        wall_s: sol.wall_time_s,
                        feasible,
                    }
                }
                Err(_) => BenchRow {
                    instance_id: inst.id.clone(),
                    solver: spec.tag(),
                    length: None,
                    wall_s: 0.0,
                    feasible: false,
                },
            })
            .collect();

        let lengths: Vec<f64> = solver_rows.iter().filter_map(|r| r.length).collect();
        let solved = lengths.len();
        let mean = lengths.iter().sum::<f64>() / solved.max(1) as f64;
        let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / solved.max(1) as f64;
        summaries.push(SolverSummary {
            solver: spec.tag(),
            mean,
            std: var.sqrt(),
            mean_wall_s: solver_rows.iter().map(|r| r.wall_s).sum::<f64>()
                / solver_rows.len() as f64,
            solved,
            failed: solver_rows.len() - solved,
        });
        rows.extend(solver_rows);
    }
    rows.sort_by(|a, b| (&a.instance_id, &a.solver).cmp(&(&b.instance_id, &b.solver)));

    let results = BenchResults { rows, summaries };
    std::fs::write(cfg.out_dir.join("results.csv"), results.rows_csv())?;
    std::fs::write(cfg.out_dir.join("summary.csv"), results.summary_csv())?;
    Ok(results)
}

/// Pairwise strict-win percentages over a common instance set.
#[derive(Debug, Clone)]
pub struct WinRateMatrix {
    pub solvers: Vec<String>,
    /// `wins[a][b]`: percent of instances where solver `a` is strictly
    /// shorter than solver `b`.
    pub wins: Vec<Vec<f64>>,
    /// `ties[a][b]`: percent of instances with equal lengths (up to
    /// float noise).
    pub ties: Vec<Vec<f64>>,
}

impl WinRateMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("solver");
        for s in &self.solvers {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
        for (i, s) in self.solvers.iter().enumerate() {
            out.push_str(s);
            for j in 0..self.solvers.len() {
                if i == j {
                    out.push(',');
                } else {
                    out.push_str(&format!(",{:.1}", self.wins[i][j]));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn lengths_by_solver(rows: &[BenchRow]) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let mut map: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for r in rows {
        if let Some(l) = r.length {
            map.entry(r.solver.clone()).or_default().insert(r.instance_id.clone(), l);
        }
    }
    Ok(map)
}

/// Lengths within this distance count as a tie: two solvers that find
/// the same tour can still differ in the last bits because they sum its
/// legs in different orders.
const WIN_EPS: f64 = 1e-9;

/// Computes the win-rate matrix from benchmark rows. Every solver must
/// cover the same instances. A win is a strictly shorter tour beyond
/// float noise ([`WIN_EPS`]); ties are counted separately.
pub fn win_rate(rows: &[BenchRow]) -> Result<WinRateMatrix> {
    let map = lengths_by_solver(rows)?;
    if map.len() < 2 {
        return Err(Error::Bench("win rates need at least two solvers".into()));
    }
    let solvers: Vec<String> = map.keys().cloned().collect();
    let reference: Vec<&String> = map[&solvers[0]].keys().collect();
    for s in &solvers {
        let ids: Vec<&String> = map[s].keys().collect();
        if ids != reference {
            return Err(Error::Bench(format!(
                "solver `{s}` covers a different instance set"
            )));
        }
    }
    let n = solvers.len();
    let count = reference.len() as f64;
    let mut wins = vec![vec![0.0; n]; n];
    let mut ties = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                ties[i][j] = 100.0;
                continue;
            }
            let (a, b) = (&map[&solvers[i]], &map[&solvers[j]]);
            let mut w = 0usize;
            let mut t = 0usize;
            for id in &reference {
                let (la, lb) = (a[*id], b[*id]);
                if la < lb - WIN_EPS {
                    w += 1;
                } else if (la - lb).abs() <= WIN_EPS {
                    t += 1;
                }
            }
            wins[i][j] = 100.0 * w as f64 / count;
            ties[i][j] = 100.0 * t as f64 / count;
        }
    }
    Ok(WinRateMatrix { solvers, wins, ties })
}

/// Optimality-gap distribution of every solver against a reference
/// solver present on every instance.
#[derive(Debug, Clone)]
pub struct GapStats {
    /// `(instance_id, solver, gap)` with gap = (len − ref) / ref.
    pub per_instance: Vec<(String, String, f64)>,
    /// Per solver: mean, p25, p50, p75, p90, max.
    pub summary: Vec<(String, GapSummary)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSummary {
    pub mean: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p90: f64,
    pub max: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Per-instance gaps relative to `reference_solver`'s length.
pub fn gap_stats(rows: &[BenchRow], reference_solver: &str) -> Result<GapStats> {
    let map = lengths_by_solver(rows)?;
    let reference = map
        .get(reference_solver)
        .ok_or_else(|| Error::Bench(format!("no rows for reference `{reference_solver}`")))?
        .clone();
    let mut per_instance = Vec::new();
    let mut by_solver: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (solver, lengths) in &map {
        for (id, len) in lengths {
            let reference_len = reference.get(id).ok_or_else(|| {
                Error::Bench(format!("reference missing instance `{id}`"))
            })?;
            let gap = (len - reference_len) / reference_len;
            per_instance.push((id.clone(), solver.clone(), gap));
            by_solver.entry(solver.clone()).or_default().push(gap);
        }
    }
    let summary = by_solver
        .into_iter()
        .map(|(solver, mut gaps)| {
            gaps.sort_by(f64::total_cmp);
            let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
            (
                solver,
                GapSummary {
                    mean,
                    p25: quantile(&gaps, 0.25),
                    p50: quantile(&gaps, 0.50),
                    p75: quantile(&gaps, 0.75),
                    p90: quantile(&gaps, 0.90),
                    max: *gaps.last().expect("non-empty gaps"),
                },
            )
        })
        .collect();
    Ok(GapStats { per_instance, summary })
}

/// Dispatch-strategy comparison configuration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SvrpBenchConfig {
    pub svrp: SvrpConfig,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    /// Strategy names: `random`, `largest-demand`, `max-reachable`,
    /// `policy` (requires `checkpoint`).
    pub strategies: Vec<String>,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub strategy_seed: u64,
}

fn default_episodes() -> usize {
    100
}

/// Per-strategy satisfied-demand table.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrpStrategySummary {
    pub strategy: String,
    pub mean_satisfied: f64,
    /// Percent of all arrived demand that was served.
    pub pct_of_arrived: f64,
    pub per_episode: Vec<u64>,
}

/// Evaluates each strategy on the same seeded episode streams: episode
/// `e` uses the identical arrival schedule for every strategy.
pub fn svrp_bench(cfg: &SvrpBenchConfig) -> Result<Vec<SvrpStrategySummary>> {
    if cfg.strategies.is_empty() {
        return Err(Error::Bench("no strategies configured".into()));
    }
    if cfg.episodes == 0 {
        return Err(Error::Bench("episodes must be positive".into()));
    }
    let policy = cfg
        .strategies
        .iter()
        .any(|s| s == "policy")
        .then(|| -> Result<(ParamStore, ModelConfig)> {
            let stem = cfg
                .checkpoint
                .as_ref()
                .ok_or_else(|| Error::Bench("`policy` strategy needs a checkpoint".into()))?;
            let (store, _) = load_checkpoint_expecting(stem, &cfg.model.arch_json())?;
            let mut params = ParamStore::new();
            for (name, t) in store.iter() {
                if crate::policy::is_actor_param(name) || crate::policy::is_critic_param(name) {
                    params.insert(name.clone(), t.clone())?;
                }
            }
            crate::policy::check_params(&params, &cfg.model)?;
            Ok((params, cfg.model))
        })
        .transpose()?;

    let mut out = Vec::with_capacity(cfg.strategies.len());
    for name in &cfg.strategies {
        let episodes: Vec<(u64, u64)> = (0..cfg.episodes as u64)
            .into_par_iter()
            .map(|e| -> Result<(u64, u64)> {
                match name.as_str() {
                    "random" => {
                        let s = run_rule_episode(&cfg.svrp, e, RuleKind::Random, cfg.strategy_seed)?;
                        Ok((s.satisfied_units, s.arrived_units))
                    }
                    "largest-demand" => {
                        let s = run_rule_episode(
                            &cfg.svrp,
                            e,
                            RuleKind::LargestDemand,
                            cfg.strategy_seed,
                        )?;
                        Ok((s.satisfied_units, s.arrived_units))
                    }
                    "max-reachable" => {
                        let s = run_rule_episode(
                            &cfg.svrp,
                            e,
                            RuleKind::MaxReachable,
                            cfg.strategy_seed,
                        )?;
                        Ok((s.satisfied_units, s.arrived_units))
                    }
                    "policy" => {
                        let (store, model) = policy.as_ref().expect("checkpoint loaded");
                        let s = run_policy_episode(&cfg.svrp, e, store, model)?;
                        Ok((s.satisfied_units, s.arrived_units))
                    }
                    other => Err(Error::Bench(format!("unknown strategy `{other}`"))),
                }
            })
            .collect::<Result<_>>()?;
        let per_episode: Vec<u64> = episodes.iter().map(|&(s, _)| s).collect();
        let total_satisfied: u64 = per_episode.iter().sum();
        let total_arrived: u64 = episodes.iter().map(|&(_, a)| a).sum();
        out.push(SvrpStrategySummary {
            strategy: name.clone(),
            mean_satisfied: total_satisfied as f64 / cfg.episodes as f64,
            pct_of_arrived: 100.0 * total_satisfied as f64 / total_arrived.max(1) as f64,
            per_episode,
        });
    }
    Ok(out)
}

/// Renders the strategy table as CSV.
pub fn svrp_summary_csv(summaries: &[SvrpStrategySummary]) -> String {
    let mut out = String::from("strategy,mean_satisfied,pct_of_arrived\n");
    for s in summaries {
        out.push_str(&format!("{},{},{}\n", s.strategy, s.mean_satisfied, s.pct_of_arrived));
    }
    out
}
