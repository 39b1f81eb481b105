//! Classical baselines and exact small-instance oracles.

mod clarke_wright;
mod cvrp_exact;
mod svrp_rules;
mod sweep;
mod tsp_exact;

pub use clarke_wright::{clarke_wright, savings, CwConfig, SavingsEntry};
pub use cvrp_exact::cvrp_exact;
pub use svrp_rules::{run_rule_episode, svrp_baseline, RuleEpisodeStats, RuleKind};
pub use sweep::{polar_angle, sweep, sweep_basic};
pub use tsp_exact::{nn_two_opt, tsp_exact, EXACT_TSP_MAX};
