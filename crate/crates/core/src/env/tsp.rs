//! Single-route test-bed: visit every city exactly once.
//!
//! Decoding starts from a uniformly drawn city; the mask forbids
//! revisits; the episode ends once all cities are visited, and the tour
//! length includes the closing leg back to the start.

use rand::Rng;

use crate::error::{Error, Result};
use crate::instances::{distance, Kind, ProblemInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct TspState {
    pub visited: Vec<bool>,
    pub position: usize,
    pub start: usize,
    pub sequence: Vec<usize>,
}

impl TspState {
    pub fn is_terminal(&self) -> bool {
        self.visited.iter().all(|&v| v)
    }
}

/// Starts an episode from a random city.
pub fn tsp_reset<R: Rng>(instance: &ProblemInstance, rng: &mut R) -> Result<TspState> {
    if instance.kind != Kind::Tsp {
        return Err(Error::Kind { expected: "tsp", got: instance.kind.as_str() });
    }
    let n = instance.n_customers();
    let start = rng.gen_range(0..n);
    let mut visited = vec![false; n];
    visited[start] = true;
    Ok(TspState { visited, position: start, start, sequence: vec![start] })
}

/// Unvisited cities are feasible.
pub fn tsp_mask(state: &TspState) -> Result<Vec<bool>> {
    if state.is_terminal() {
        return Err(Error::TerminalState);
    }
    Ok(state.visited.iter().map(|&v| !v).collect())
}

/// Moves to an unvisited city; done once every city is visited.
pub fn tsp_step(state: &mut TspState, action: usize) -> Result<bool> {
    let mask = tsp_mask(state)?;
    if action >= mask.len() || !mask[action] {
        return Err(Error::InfeasibleAction { action, reason: "city already visited".into() });
    }
    state.visited[action] = true;
    state.position = action;
    state.sequence.push(action);
    Ok(state.is_terminal())
}

/// Closed-tour length: consecutive legs plus the return to the first city.
pub fn tsp_tour_length(instance: &ProblemInstance, sequence: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for pair in sequence.windows(2) {
        total += distance(instance.node_coord(pair[0])?, instance.node_coord(pair[1])?);
    }
    if sequence.len() > 1 {
        total += distance(
            instance.node_coord(*sequence.last().unwrap())?,
            instance.node_coord(sequence[0])?,
        );
    }
    Ok(total)
}
