//! Exact single-visit CVRP oracle.
//!
//! Two-level dynamic program. First a subset DP computes, for every
//! capacity-feasible customer subset, the optimal open route
//! depot -> subset -> last customer (Held-Karp with the depot as anchor),
//! closed by the return leg. Then a set-partition DP splits the full
//! customer set into feasible routes at minimum total cost. Exponential
//! in the customer count, so callers are capped at 12 customers.

use std::time::Instant;

use crate::env::Solution;
use crate::error::{Error, Result};
use crate::instances::{distance, Kind, ProblemInstance};

const EXACT_CVRP_MAX: usize = 12;

/// Optimal non-split CVRP tour for instances with at most 12 customers.
pub fn cvrp_exact(instance: &ProblemInstance) -> Result<Solution> {
    if instance.kind != Kind::Cvrp {
        return Err(Error::Kind { expected: "cvrp", got: instance.kind.as_str() });
    }
    let n = instance.n_customers();
    if n > EXACT_CVRP_MAX {
        return Err(Error::SizeLimit { what: "exact cvrp", n, max: EXACT_CVRP_MAX });
    }
    let start = Instant::now();
    let depot = instance.depot.expect("cvrp instance has a depot");
    let capacity = instance.capacity.expect("cvrp instance has a capacity");
    let demands = instance.demands();
    let locs: Vec<_> = instance.customers.iter().map(|c| c.location).collect();
    let full = 1usize << n;

    // Demand per subset, one lowest-bit expansion at a time.
    let mut demand_sum = vec![0u32; full];
    for mask in 1..full {
        let low = mask.trailing_zeros() as usize;
        demand_sum[mask] = demand_sum[mask & (mask - 1)] + demands[low];
    }

    // Held-Karp over all subsets: path[mask][j] = shortest depot -> mask
    // ending at j, for j in mask.
    let mut path = vec![f64::INFINITY; full * n];
    let mut parent = vec![usize::MAX; full * n];
    for j in 0..n {
        path[(1 << j) * n + j] = distance(depot, locs[j]);
    }
    for mask in 1..full {
        for j in 0..n {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cur = path[mask * n + j];
            if !cur.is_finite() {
                continue;
            }
            let mut rest = (!mask) & (full - 1);
            while rest != 0 {
                let k = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let next = mask | (1 << k);
                let cand = cur + distance(locs[j], locs[k]);
                if cand < path[next * n + k] {
                    path[next * n + k] = cand;
                    parent[next * n + k] = j;
                }
            }
        }
    }

    // Closed-route cost per feasible subset, remembering the end customer.
    let mut route_cost = vec![f64::INFINITY; full];
    let mut route_end = vec![usize::MAX; full];
    for mask in 1..full {
        if demand_sum[mask] > capacity {
            continue;
        }
        for j in 0..n {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cand = path[mask * n + j] + distance(locs[j], depot);
            if cand < route_cost[mask] {
                route_cost[mask] = cand;
                route_end[mask] = j;
            }
        }
    }

    // Partition the full set into routes; anchoring each block on the
    // lowest remaining customer visits every partition once.
    let mut best = vec![f64::INFINITY; full];
    let mut choice = vec![0usize; full];
    best[0] = 0.0;
    for mask in 1..full {
        let low = 1usize << mask.trailing_zeros();
        let mut sub = mask;
        while sub != 0 {
            if sub & low != 0 && route_cost[sub].is_finite() && best[mask ^ sub].is_finite() {
                let cand = best[mask ^ sub] + route_cost[sub];
                if cand < best[mask] {
                    best[mask] = cand;
                    choice[mask] = sub;
                }
            }
            sub = (sub - 1) & mask;
        }
    }
    debug_assert!(best[full - 1].is_finite(), "capacity >= max demand guarantees a partition");

    // Reconstruct route orders from the Held-Karp parents.
    let depot_idx = instance.depot_index();
    let mut sequence = vec![depot_idx];
    let mut mask = full - 1;
    while mask != 0 {
        let sub = choice[mask];
        let mut route = Vec::new();
        let (mut m, mut j) = (sub, route_end[sub]);
        while j != usize::MAX {
            route.push(j);
            let pj = parent[m * n + j];
            m &= !(1 << j);
            j = pj;
        }
        route.reverse();
        sequence.extend_from_slice(&route);
        sequence.push(depot_idx);
        mask ^= sub;
    }

    let mut solution =
        Solution::from_sequence(instance, "exact", sequence, start.elapsed().as_secs_f64())?;
    // The DP total is the authoritative objective; the sequence recomputes
    // to the same value up to float association.
    debug_assert!((solution.total_length - best[full - 1]).abs() < 1e-9);
    solution.total_length = best[full - 1];
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::validate_solution;
    use crate::instances::{generate_instance_at, Coord, CustomerSpec, GeneratorConfig};

    #[test]
    fn single_customer_is_out_and_back() {
        let inst = ProblemInstance {
            kind: Kind::Cvrp,
            id: "one".into(),
            capacity: Some(10),
            depot: Some(Coord::new(0.1, 0.1)),
            customers: vec![CustomerSpec { location: Coord::new(0.4, 0.5), demand: 3 }],
        };
        let sol = cvrp_exact(&inst).unwrap();
        assert_eq!(sol.sequence, vec![1, 0, 1]);
        let d = distance(Coord::new(0.1, 0.1), Coord::new(0.4, 0.5));
        assert!((sol.total_length - 2.0 * d).abs() < 1e-12);
    }

    #[test]
    fn solutions_are_feasible_and_bound_heuristics() {
        let cfg = GeneratorConfig::new(8, 20, 91);
        for i in 0..10 {
            let inst = generate_instance_at(&cfg, i).unwrap();
            let exact = cvrp_exact(&inst).unwrap();
            let report = validate_solution(&inst, &exact.sequence, false).unwrap();
            assert!(report.feasible, "{:?}", report.violations);
            let cw = crate::heuristics::clarke_wright(&inst, &super::super::CwConfig::greedy())
                .unwrap();
            assert!(exact.total_length <= cw.total_length + 1e-9);
            let sw = crate::heuristics::sweep_basic(&inst).unwrap();
            assert!(exact.total_length <= sw.total_length + 1e-9);
        }
    }

    #[test]
    fn size_limit_enforced() {
        let inst = generate_instance_at(&GeneratorConfig::new(13, 20, 1), 0).unwrap();
        assert!(matches!(cvrp_exact(&inst), Err(Error::SizeLimit { .. })));
    }
}
