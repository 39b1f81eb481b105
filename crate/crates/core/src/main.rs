//! `vrpkit` command-line interface.
//!
//! Subcommands cover the full workflow: `gen` writes instance sets,
//! `solve` runs one solver over a set, `train` runs REINFORCE or A3C
//! from a JSON config, `eval` scores a checkpoint, `bench` runs the
//! full comparison harness, `svrp` compares dispatch strategies, and
//! `attn` dumps attention weights for a single instance.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use vrpkit::bench::{
    gap_stats, run_bench, svrp_bench, svrp_summary_csv, win_rate, BenchConfig, RlMode,
    SolverSpec, SvrpBenchConfig,
};
use vrpkit::instances::{generate_batch, read_instances, write_instances, GeneratorConfig};
use vrpkit::nncore::load_checkpoint_expecting;
use vrpkit::policy::{export_attention, write_attention, DecodeMode, ModelConfig};
use vrpkit::training::{a3c_train, evaluate, reinforce_train, A3cConfig, TrainConfig};

#[derive(Parser)]
#[command(name = "vrpkit", version, about = "Vehicle-routing toolkit: solvers, training, benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a JSON-Lines instance set.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        capacity: u32,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve every instance in a file with one solver.
    Solve {
        /// One of: cw, sweep-basic, sweep-rnd, exact, rl-greedy,
        /// rl-sample, rl-beam.
        #[arg(long)]
        solver: String,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        beam_width: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Allow split deliveries (learned solvers only).
        #[arg(long, default_value_t = false)]
        split: bool,
        #[arg(long, default_value_t = 1)]
        cw_r: usize,
        #[arg(long, default_value_t = 1)]
        cw_m: usize,
        #[arg(long, default_value_t = 1)]
        sweep_r: usize,
        #[arg(long, default_value_t = 128)]
        d_model: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train from a JSON config: {"algo":"reinforce",...} or
    /// {"algo":"a3c",...}.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint over an instance file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        /// greedy, sample, or beam:<width>.
        #[arg(long, default_value = "greedy")]
        mode: String,
        #[arg(long, default_value_t = false)]
        split: bool,
        #[arg(long, default_value_t = 128)]
        d_model: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the per-instance CSV here (summary always prints).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the benchmark harness from a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare dispatch strategies on the stochastic simulator.
    Svrp {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated: random,largest-demand,max-reachable,policy.
        #[arg(long)]
        strategies: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export per-step attention weights for the first instance of a
    /// file under greedy decoding.
    Attn {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 128)]
        d_model: usize,
    },
}

/// Training config dispatch: the `algo` field picks the trainer.
#[derive(serde::Deserialize)]
#[serde(tag = "algo", rename_all = "lowercase")]
enum TrainDispatch {
    Reinforce(TrainConfig),
    A3c(A3cConfig),
}

fn parse_mode(mode: &str) -> anyhow::Result<DecodeMode> {
    match mode {
        "greedy" => Ok(DecodeMode::Greedy),
        "sample" => Ok(DecodeMode::Sample),
        other => {
            if let Some(w) = other.strip_prefix("beam:") {
                Ok(DecodeMode::Beam(w.parse().context("beam width")?))
            } else {
                bail!("unknown mode `{other}` (greedy, sample, beam:<width>)")
            }
        }
    }
}

fn load_policy(
    checkpoint: &PathBuf,
    d_model: usize,
) -> anyhow::Result<(vrpkit::nncore::ParamStore, ModelConfig)> {
    let model = ModelConfig::with_width(d_model);
    let (full, _) = load_checkpoint_expecting(checkpoint, &model.arch_json())?;
    let mut params = vrpkit::nncore::ParamStore::new();
    for (name, t) in full.iter() {
        if vrpkit::policy::is_actor_param(name) || vrpkit::policy::is_critic_param(name) {
            params.insert(name.clone(), t.clone())?;
        }
    }
    vrpkit::policy::check_params(&params, &model)?;
    Ok((params, model))
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Gen { n, capacity, count, seed, out } => {
            let cfg = GeneratorConfig::new(n, capacity, seed);
            let instances = generate_batch(&cfg, count)?;
            write_instances(&out, &instances)?;
            println!("wrote {} instances to {}", count, out.display());
        }
        Command::Solve {
            solver,
            instances,
            out,
            beam_width,
            checkpoint,
            split,
            cw_r,
            cw_m,
            sweep_r,
            d_model,
            seed,
        } => {
            let model = ModelConfig::with_width(d_model);
            let spec = match solver.as_str() {
                "cw" => SolverSpec::Cw { r: cw_r, m: cw_m },
                "sweep-basic" => SolverSpec::SweepBasic,
                "sweep-rnd" => SolverSpec::SweepRnd { r: sweep_r },
                "exact" => SolverSpec::Exact,
                rl @ ("rl-greedy" | "rl-sample" | "rl-beam") => {
                    let checkpoint =
                        checkpoint.context("learned solvers need --checkpoint")?;
                    let mode = match rl {
                        "rl-greedy" => RlMode::Greedy,
                        "rl-sample" => RlMode::Sample,
                        _ => RlMode::Beam(beam_width),
                    };
                    SolverSpec::Rl { mode, checkpoint, split, model }
                }
                other => bail!("unknown solver `{other}`"),
            };
            let set = read_instances(&instances)?;
            let dir = solve_scratch_dir(&out)?;
            let cfg = BenchConfig {
                instances: vrpkit::bench::InstanceSource::Path { path: instances },
                solvers: vec![spec],
                out_dir: dir,
                seed,
            };
            let results = run_bench(&cfg)?;
            std::fs::write(&out, results.rows_csv())?;
            let summary = &results.summaries[0];
            println!(
                "{}: {} solved, {} failed, mean {:.4}, std {:.4}, mean time {:.4}s over {} instances",
                summary.solver,
                summary.solved,
                summary.failed,
                summary.mean,
                summary.std,
                summary.mean_wall_s,
                set.len()
            );
        }
        Command::Train { config } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            match serde_json::from_str::<TrainDispatch>(&text).context("parsing train config")? {
                TrainDispatch::Reinforce(cfg) => {
                    let (_store, metrics) = reinforce_train(&cfg)?;
                    let last = metrics.rows.last().context("no iterations ran")?;
                    println!(
                        "trained {} iterations; final mean tour length {:.4}; checkpoints in {}",
                        metrics.rows.len(),
                        last.mean_reward,
                        cfg.checkpoint_dir.display()
                    );
                }
                TrainDispatch::A3c(cfg) => {
                    let (_store, rows) = a3c_train(&cfg, None)?;
                    let mean: f64 = rows.iter().map(|r| r.satisfied_units as f64).sum::<f64>()
                        / rows.len().max(1) as f64;
                    println!(
                        "trained {} episodes; mean satisfied demand {:.2}; checkpoint in {}",
                        rows.len(),
                        mean,
                        cfg.checkpoint_dir.display()
                    );
                }
            }
        }
        Command::Eval { checkpoint, instances, mode, split, d_model, seed, out } => {
            let (store, model) = load_policy(&checkpoint, d_model)?;
            let set = read_instances(&instances)?;
            let mode = parse_mode(&mode)?;
            let summary = evaluate(&store, &model, &set, mode, split, seed)?;
            if let Some(path) = out {
                std::fs::write(&path, summary.to_csv())?;
            }
            println!(
                "mean {:.4}, std {:.4}, mean time {:.4}s over {} instances",
                summary.mean_length,
                summary.std_length,
                summary.mean_wall_s,
                summary.solutions.len()
            );
        }
        Command::Bench { config } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg: BenchConfig = serde_json::from_str(&text).context("parsing bench config")?;
            let results = run_bench(&cfg)?;
            print!("{}", results.summary_csv());
            if cfg.solvers.len() >= 2 {
                let matrix = win_rate(&results.rows)?;
                std::fs::write(cfg.out_dir.join("win_rate.csv"), matrix.to_csv())?;
                if results.summaries.iter().any(|s| s.solver == "exact" && s.failed == 0) {
                    let stats = gap_stats(&results.rows, "exact")?;
                    let mut csv = String::from("solver,mean,p25,p50,p75,p90,max\n");
                    for (solver, g) in &stats.summary {
                        csv.push_str(&format!(
                            "{},{},{},{},{},{},{}\n",
                            solver, g.mean, g.p25, g.p50, g.p75, g.p90, g.max
                        ));
                    }
                    std::fs::write(cfg.out_dir.join("gaps.csv"), csv)?;
                }
            }
            println!("results in {}", cfg.out_dir.display());
        }
        Command::Svrp { config, strategies, checkpoint, out } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: SvrpBenchConfig =
                serde_json::from_str(&text).context("parsing svrp config")?;
            cfg.strategies = strategies.split(',').map(|s| s.trim().to_string()).collect();
            if checkpoint.is_some() {
                cfg.checkpoint = checkpoint;
            }
            let summaries = svrp_bench(&cfg)?;
            let csv = svrp_summary_csv(&summaries);
            print!("{csv}");
            if let Some(path) = out {
                std::fs::write(&path, csv)?;
            }
        }
        Command::Attn { checkpoint, instance, out, steps, d_model } => {
            let (store, model) = load_policy(&checkpoint, d_model)?;
            let set = read_instances(&instance)?;
            let first = set.first().context("instance file is empty")?;
            let records = export_attention(first, &store, &model, steps)?;
            write_attention(&out, &records)?;
            println!("wrote {} steps of attention data to {}", records.len(), out.display());
        }
    }
    Ok(())
}

/// Directory for `solve`'s intermediate bench output, next to the
/// requested output file.
fn solve_scratch_dir(out: &std::path::Path) -> anyhow::Result<PathBuf> {
    let dir = out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(|p| p.join(".vrpkit-solve"))
        .unwrap_or_else(|| PathBuf::from(".vrpkit-solve"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
