//! Rule-based dispatch strategies for the stochastic simulator.
//!
//! All three route to the depot whenever the vehicle is empty. With load:
//!
//! - `Random`: uniform over active customers plus depot and stay.
//! - `LargestDemand`: the active customer with maximum demand.
//! - `MaxReachable`: the maximum-demand customer among those whose
//!   remaining patience covers the travel time from the vehicle's
//!   current position.
//!
//! Demand ties break toward the earlier arrival (lower id). An empty
//! choice set parks the vehicle.

use rand::Rng;

use crate::env::{svrp_reset, svrp_step, SvrpAction, SvrpConfig, SvrpState};
use crate::error::Result;
use crate::instances::distance;
use crate::rng::{self, Domain};

/// Which rule to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Random,
    LargestDemand,
    MaxReachable,
}

impl RuleKind {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::LargestDemand => "largest-demand",
            Self::MaxReachable => "max-reachable",
        }
    }
}

/// Picks the next action for a non-terminal state.
pub fn svrp_baseline<R: Rng>(kind: RuleKind, state: &SvrpState, rng: &mut R) -> SvrpAction {
    if state.load == 0 {
        return SvrpAction::Depot;
    }
    match kind {
        RuleKind::Random => {
            let k = state.active.len();
            match rng.gen_range(0..k + 2) {
                i if i < k => SvrpAction::Visit(state.active[i].id),
                i if i == k => SvrpAction::Depot,
                _ => SvrpAction::Stay,
            }
        }
        RuleKind::LargestDemand => state
            .active
            .iter()
            .max_by(|a, b| a.demand.cmp(&b.demand).then(b.id.cmp(&a.id)))
            .map_or(SvrpAction::Stay, |c| SvrpAction::Visit(c.id)),
        RuleKind::MaxReachable => state
            .active
            .iter()
            .filter(|c| {
                let travel = distance(state.vehicle, c.location) / state.config.speed;
                state.remaining_patience(c) >= travel
            })
            .max_by(|a, b| a.demand.cmp(&b.demand).then(b.id.cmp(&a.id)))
            .map_or(SvrpAction::Stay, |c| SvrpAction::Visit(c.id)),
    }
}

/// Episode outcome for strategy comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleEpisodeStats {
    pub satisfied_units: u64,
    pub arrived_units: u64,
}

/// Plays one full episode under a rule. The arrival process comes from
/// `(config.seed, episode)`; the rule's own randomness (only `Random`
/// uses any) comes from `strategy_seed`, so every strategy sees identical
/// episodes.
pub fn run_rule_episode(
    config: &SvrpConfig,
    episode: u64,
    kind: RuleKind,
    strategy_seed: u64,
) -> Result<RuleEpisodeStats> {
    let mut state = svrp_reset(config, episode)?;
    let mut rng = rng::stream(strategy_seed, Domain::Strategy, episode);
    while !state.done {
        let action = svrp_baseline(kind, &state, &mut rng);
        svrp_step(&mut state, action)?;
    }
    Ok(RuleEpisodeStats { satisfied_units: state.satisfied_units, arrived_units: state.arrived_units })
}
