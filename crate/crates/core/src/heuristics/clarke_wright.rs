//! Randomized Clarke-Wright savings heuristic.
//!
//! Every customer starts on its own depot-to-depot route. Merging the
//! routes of `i` and `j` by the edge `(i, j)` saves
//!
//! ```text
//! s_ij = c_i0 + c_0j - c_ij
//! ```
//!
//! and a merge is feasible when `i` and `j` sit on different routes, both
//! are endpoint customers (adjacent to the depot), and the combined
//! demand fits the vehicle. The randomized variant runs the merge loop
//! once per `(r, m)` pair with `r` in `1..=R` and `m` in `1..=M`, each
//! time picking uniformly among the `r` best feasible positive-saving
//! mergers, and keeps the shortest tour found. `R = M = 1` is the
//! deterministic greedy heuristic. One RNG stream, seeded from the
//! config, is consumed sequentially across all runs; the `r = 1` runs
//! never draw from it, so the greedy tour is always among the candidates.

use std::time::Instant;

use rand::Rng;

use crate::env::Solution;
use crate::error::{Error, Result};
use crate::instances::{distance, Kind, ProblemInstance};
use crate::rng::{self, Domain};

/// Randomization parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CwConfig {
    /// Randomization depth `R`: mergers are drawn from the top `r` for
    /// `r` in `1..=R`.
    pub randomization_depth: usize,
    /// Randomization iterations `M`: merge-loop repeats per depth.
    pub randomization_iterations: usize,
    pub seed: u64,
}

impl CwConfig {
    /// The deterministic greedy configuration.
    pub fn greedy() -> Self {
        Self { randomization_depth: 1, randomization_iterations: 1, seed: 0 }
    }

    pub fn randomized(depth: usize, iterations: usize, seed: u64) -> Self {
        Self { randomization_depth: depth, randomization_iterations: iterations, seed }
    }

    fn check(&self) -> Result<()> {
        if self.randomization_depth == 0 || self.randomization_iterations == 0 {
            return Err(Error::Config("clarke-wright R and M must be at least 1".into()));
        }
        Ok(())
    }

    pub fn tag(&self) -> String {
        if self.randomization_depth == 1 && self.randomization_iterations == 1 {
            "cw-greedy".into()
        } else {
            format!("cw-rnd({},{})", self.randomization_depth, self.randomization_iterations)
        }
    }
}

/// One merge candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SavingsEntry {
    pub i: usize,
    pub j: usize,
    pub saving: f64,
}

/// All pairwise savings with `i < j`, sorted by saving descending and
/// `(i, j)` ascending on ties. Self-pairs are zero by definition and
/// omitted.
pub fn savings(instance: &ProblemInstance) -> Result<Vec<SavingsEntry>> {
    if instance.kind != Kind::Cvrp {
        return Err(Error::Kind { expected: "cvrp", got: instance.kind.as_str() });
    }
    let depot = instance.depot.expect("cvrp instance has a depot");
    let n = instance.n_customers();
    let to_depot: Vec<f64> =
        instance.customers.iter().map(|c| distance(c.location, depot)).collect();
    let mut entries = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let saving = to_depot[i] + to_depot[j]
                - distance(instance.customers[i].location, instance.customers[j].location);
            entries.push(SavingsEntry { i, j, saving });
        }
    }
    entries.sort_by(|a, b| {
        b.saving.total_cmp(&a.saving).then_with(|| (a.i, a.j).cmp(&(b.i, b.j)))
    });
    Ok(entries)
}

struct Routes {
    /// Customer chains; `None` once absorbed by a merge.
    chains: Vec<Option<Vec<usize>>>,
    route_of: Vec<usize>,
    demand: Vec<u32>,
    capacity: u32,
}

impl Routes {
    fn singletons(instance: &ProblemInstance) -> Self {
        let n = instance.n_customers();
        Self {
            chains: (0..n).map(|i| Some(vec![i])).collect(),
            route_of: (0..n).collect(),
            demand: instance.demands(),
            capacity: instance.capacity.expect("cvrp instance has a capacity"),
        }
    }

    /// A merger is feasible when the endpoints are depot-adjacent, on
    /// different routes, and the joint demand fits.
    fn feasible(&self, e: &SavingsEntry) -> bool {
        let (ri, rj) = (self.route_of[e.i], self.route_of[e.j]);
        if ri == rj {
            return false;
        }
        let ci = self.chains[ri].as_ref().expect("live route");
        let cj = self.chains[rj].as_ref().expect("live route");
        let endpoint_i = *ci.first().unwrap() == e.i || *ci.last().unwrap() == e.i;
        let endpoint_j = *cj.first().unwrap() == e.j || *cj.last().unwrap() == e.j;
        endpoint_i && endpoint_j && self.demand[ri] + self.demand[rj] <= self.capacity
    }

    /// Joins the two routes with the edge `(i, j)`.
    fn merge(&mut self, e: &SavingsEntry) {
        let (ri, rj) = (self.route_of[e.i], self.route_of[e.j]);
        let mut ci = self.chains[ri].take().expect("live route");
        let mut cj = self.chains[rj].take().expect("live route");
        if *ci.last().unwrap() != e.i {
            ci.reverse();
        }
        if *cj.first().unwrap() != e.j {
            cj.reverse();
        }
        ci.extend_from_slice(&cj);
        for &c in &cj {
            self.route_of[c] = ri;
        }
        self.demand[ri] += self.demand[rj];
        self.demand[rj] = 0;
        self.chains[ri] = Some(ci);
    }

    /// Final node sequence with depot separators, routes canonicalized
    /// (lexicographically smaller direction, ordered by first customer).
    fn into_sequence(self, depot: usize) -> Vec<usize> {
        let mut routes: Vec<Vec<usize>> = self.chains.into_iter().flatten().collect();
        for r in &mut routes {
            let rev: Vec<usize> = r.iter().rev().copied().collect();
            if rev < *r {
                *r = rev;
            }
        }
        routes.sort();
        let mut seq = vec![depot];
        for r in routes {
            seq.extend_from_slice(&r);
            seq.push(depot);
        }
        seq
    }
}

/// Runs the randomized savings heuristic and returns the shortest tour
/// over all `R * M` merge loops (ties broken by lexicographically
/// smaller sequence).
pub fn clarke_wright(instance: &ProblemInstance, cfg: &CwConfig) -> Result<Solution> {
    cfg.check()?;
    let start = Instant::now();
    let table = savings(instance)?;
    let depot = instance.depot_index();
    let mut rng = rng::stream(cfg.seed, Domain::Heuristic, 0);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 1..=cfg.randomization_depth {
        for _ in 1..=cfg.randomization_iterations {
            let mut routes = Routes::singletons(instance);
            loop {
                // Savings are static, so the top-r feasible candidates are
                // the first r feasible entries of the presorted table.
                let mut top: Vec<&SavingsEntry> = Vec::with_capacity(r);
                for e in &table {
                    if e.saving <= 0.0 {
                        break;
                    }
                    if routes.feasible(e) {
                        top.push(e);
                        if top.len() == r {
                            break;
                        }
                    }
                }
                let Some(pick) = (match top.len() {
                    0 => None,
                    1 => Some(top[0]),
                    k => Some(top[rng.gen_range(0..k)]),
                }) else {
                    break;
                };
                routes.merge(pick);
            }
            let seq = routes.into_sequence(depot);
            let len = crate::env::tour_length(instance, &seq)?;
            let better = match &best {
                None => true,
                Some((bl, bs)) => len < *bl || (len == *bl && seq < *bs),
            };
            if better {
                best = Some((len, seq));
            }
        }
    }
    let (_, sequence) = best.expect("R, M >= 1 produces at least one run");
    Solution::from_sequence(instance, cfg.tag(), sequence, start.elapsed().as_secs_f64())
}
