//! Sweep heuristic: cluster by polar angle, route each cluster as a TSP.
//!
//! Customers are ordered by angle around the depot (counter-clockwise
//! from the positive x-axis, ties by radius then index). Starting from an
//! initial angle, a cluster accumulates customers until the next one no
//! longer fits the remaining load, which opens a fresh cluster — exactly
//! the textbook bookkeeping, with no repacking. Each cluster plus the
//! depot is routed by the exact subset DP when it has at most
//! [`EXACT_TSP_MAX`](super::EXACT_TSP_MAX) points, otherwise by
//! nearest-neighbor plus 2-opt.
//!
//! The basic variant sweeps once from angle 0; the randomized variant
//! tries `R` uniform initial angles and keeps the shortest tour.

use std::f64::consts::TAU;
use std::time::Instant;

use rand::Rng;

use crate::env::Solution;
use crate::error::{Error, Result};
use crate::instances::{distance, Coord, Kind, ProblemInstance};
use crate::rng::{self, Domain};

/// Angle of `point` around `center`, in `[0, 2π)`; a point directly east
/// of the center has angle 0.
pub fn polar_angle(center: Coord, point: Coord) -> f64 {
    let a = (point.y - center.y).atan2(point.x - center.x);
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

fn sweep_from(instance: &ProblemInstance, start_angle: f64) -> Result<(f64, Vec<usize>)> {
    let depot = instance.depot.expect("cvrp instance has a depot");
    let capacity = instance.capacity.expect("cvrp instance has a capacity");
    let demands = instance.demands();

    let mut order: Vec<usize> = (0..instance.n_customers()).collect();
    let keyed: Vec<(f64, f64)> = instance
        .customers
        .iter()
        .map(|c| {
            let angle = (polar_angle(depot, c.location) - start_angle).rem_euclid(TAU);
            (angle, distance(depot, c.location))
        })
        .collect();
    order.sort_by(|&a, &b| {
        keyed[a].0.total_cmp(&keyed[b].0).then(keyed[a].1.total_cmp(&keyed[b].1)).then(a.cmp(&b))
    });

    let mut clusters: Vec<Vec<usize>> = vec![Vec::new()];
    let mut load = capacity;
    for &i in &order {
        if demands[i] > load {
            clusters.push(Vec::new());
            load = capacity;
        }
        clusters.last_mut().unwrap().push(i);
        load -= demands[i];
    }

    let depot_idx = instance.depot_index();
    let mut sequence = vec![depot_idx];
    let mut total = 0.0;
    for cluster in clusters.iter().filter(|c| !c.is_empty()) {
        debug_assert!(cluster.iter().map(|&i| demands[i]).sum::<u32>() <= capacity);
        let mut points = vec![depot];
        points.extend(cluster.iter().map(|&i| instance.customers[i].location));
        let (tour, len) = if points.len() <= super::EXACT_TSP_MAX {
            super::tsp_exact(&points)?
        } else {
            super::nn_two_opt(&points)?
        };
        total += len;
        // The tour is anchored at the depot (point 0); keep the
        // lexicographically smaller direction for determinism.
        let mut route: Vec<usize> = tour[1..].iter().map(|&p| cluster[p - 1]).collect();
        let rev: Vec<usize> = route.iter().rev().copied().collect();
        if rev < route {
            route = rev;
        }
        sequence.extend_from_slice(&route);
        sequence.push(depot_idx);
    }
    Ok((total, sequence))
}

/// One sweep from angle 0.
pub fn sweep_basic(instance: &ProblemInstance) -> Result<Solution> {
    if instance.kind != Kind::Cvrp {
        return Err(Error::Kind { expected: "cvrp", got: instance.kind.as_str() });
    }
    let start = Instant::now();
    let (_, sequence) = sweep_from(instance, 0.0)?;
    Solution::from_sequence(instance, "sw-basic", sequence, start.elapsed().as_secs_f64())
}

/// `restarts` sweeps from uniform random initial angles; shortest tour
/// wins, ties by lexicographically smaller sequence.
pub fn sweep(instance: &ProblemInstance, restarts: usize, seed: u64) -> Result<Solution> {
    if instance.kind != Kind::Cvrp {
        return Err(Error::Kind { expected: "cvrp", got: instance.kind.as_str() });
    }
    if restarts == 0 {
        return Err(Error::Config("sweep needs at least one restart".into()));
    }
    let start = Instant::now();
    let mut rng = rng::stream(seed, Domain::Heuristic, 1);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts {
        let angle = rng.gen::<f64>() * TAU;
        let (len, seq) = sweep_from(instance, angle)?;
        let better = match &best {
            None => true,
            Some((bl, bs)) => len < *bl || (len == *bl && seq < *bs),
        };
        if better {
            best = Some((len, seq));
        }
    }
    let (_, sequence) = best.expect("restarts >= 1");
    Solution::from_sequence(
        instance,
        format!("sw-rnd({restarts})"),
        sequence,
        start.elapsed().as_secs_f64(),
    )
}
