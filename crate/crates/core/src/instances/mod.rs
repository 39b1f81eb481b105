//! Problem generation and distance geometry.
//!
//! Instances live on the unit square: customer and depot coordinates are
//! i.i.d. uniform, demands are uniform integers in a configured range
//! (1..=9 by default). Generation is fully determined by a 64-bit seed;
//! the draw order is fixed as depot first, then per customer x, y, demand.

mod io;

pub use io::{read_instances, write_instances};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// A point in the plane. Generated instances keep both components in
/// [0, 1]; the stochastic-dispatch simulator reuses the type for
/// interpolated vehicle positions, where only finiteness is required.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Coord {
    pub x: f64,
    pub y: f64,
}

impl Coord {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Euclidean distance between two points.
///
/// Symmetric, zero exactly when the points coincide, and satisfies the
/// triangle inequality; routing code never needs a distance matrix.
pub fn distance(a: Coord, b: Coord) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// A customer: a location plus an integer demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CustomerSpec {
    pub location: Coord,
    /// Units requested. Integer by design: load bookkeeping stays exact.
    pub demand: u32,
}

/// Which problem an instance encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Cvrp,
    Tsp,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cvrp => "cvrp",
            Self::Tsp => "tsp",
        }
    }
}

/// A routing problem instance.
///
/// For `Cvrp` the depot and capacity are present and every demand is
/// positive and at most the capacity. For `Tsp` there is no depot, no
/// capacity, and demands are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub kind: Kind,
    pub id: String,
    pub capacity: Option<u32>,
    pub depot: Option<Coord>,
    pub customers: Vec<CustomerSpec>,
}

impl ProblemInstance {
    /// Number of customers (cities for TSP).
    pub fn n_customers(&self) -> usize {
        self.customers.len()
    }

    /// Node count including the depot for CVRP instances.
    pub fn n_nodes(&self) -> usize {
        match self.kind {
            Kind::Cvrp => self.customers.len() + 1,
            Kind::Tsp => self.customers.len(),
        }
    }

    /// Index used for the depot in CVRP node sequences: customers are
    /// `0..n`, the depot is `n`.
    pub fn depot_index(&self) -> usize {
        self.customers.len()
    }

    /// Coordinate of a node index (customer or, for CVRP, the depot).
    pub fn node_coord(&self, node: usize) -> Result<Coord> {
        if node < self.customers.len() {
            return Ok(self.customers[node].location);
        }
        if self.kind == Kind::Cvrp && node == self.depot_index() {
            return Ok(self.depot.expect("cvrp instance has a depot"));
        }
        Err(Error::InfeasibleAction {
            action: node,
            reason: format!("node index out of range for {} nodes", self.n_nodes()),
        })
    }

    pub fn demands(&self) -> Vec<u32> {
        self.customers.iter().map(|c| c.demand).collect()
    }

    fn check(&self) -> Result<()> {
        if self.customers.is_empty() {
            return Err(Error::Config("instance has no customers".into()));
        }
        match self.kind {
            Kind::Cvrp => {
                let cap = self
                    .capacity
                    .ok_or_else(|| Error::Config("cvrp instance missing capacity".into()))?;
                if self.depot.is_none() {
                    return Err(Error::Config("cvrp instance missing depot".into()));
                }
                if let Some(c) = self.customers.iter().find(|c| c.demand == 0 || c.demand > cap) {
                    return Err(Error::Config(format!(
                        "cvrp demand {} outside 1..={cap}",
                        c.demand
                    )));
                }
            }
            Kind::Tsp => {
                if self.customers.len() < 2 {
                    return Err(Error::Config("tsp instance needs at least 2 cities".into()));
                }
            }
        }
        Ok(())
    }

    /// Validates invariants, returning the instance for chaining.
    pub fn validated(self) -> Result<Self> {
        self.check()?;
        Ok(self)
    }
}

/// Configuration for sampling CVRP instances.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeneratorConfig {
    pub n_customers: usize,
    pub capacity: u32,
    #[serde(default = "default_demand_lo")]
    pub demand_lo: u32,
    #[serde(default = "default_demand_hi")]
    pub demand_hi: u32,
    pub seed: u64,
}

fn default_demand_lo() -> u32 {
    1
}

fn default_demand_hi() -> u32 {
    9
}

impl GeneratorConfig {
    pub fn new(n_customers: usize, capacity: u32, seed: u64) -> Self {
        Self { n_customers, capacity, demand_lo: 1, demand_hi: 9, seed }
    }

    fn check(&self) -> Result<()> {
        if self.n_customers == 0 {
            return Err(Error::Config("n_customers must be positive".into()));
        }
        if self.demand_lo == 0 || self.demand_lo > self.demand_hi {
            return Err(Error::Config(format!(
                "empty demand range {}..={}",
                self.demand_lo, self.demand_hi
            )));
        }
        if self.capacity < self.demand_hi {
            return Err(Error::Config(format!(
                "capacity {} below maximum demand {}",
                self.capacity, self.demand_hi
            )));
        }
        Ok(())
    }
}

/// Samples one CVRP instance, the `index`-th of the stream named by
/// `cfg.seed`. Calling twice with the same arguments yields identical
/// instances.
pub fn generate_instance_at(cfg: &GeneratorConfig, index: u64) -> Result<ProblemInstance> {
    cfg.check()?;
    let mut rng = rng::stream(cfg.seed, Domain::Generate, index);
    // Depot first, then (x, y, demand) per customer; documented draw order.
    let depot = Coord::new(rng.gen::<f64>(), rng.gen::<f64>());
    let customers = (0..cfg.n_customers)
        .map(|_| {
            let location = Coord::new(rng.gen::<f64>(), rng.gen::<f64>());
            let demand = rng.gen_range(cfg.demand_lo..=cfg.demand_hi);
            CustomerSpec { location, demand }
        })
        .collect();
    ProblemInstance {
        kind: Kind::Cvrp,
        id: format!(
            "cvrp{}-cap{}-seed{}-{index:06}",
            cfg.n_customers, cfg.capacity, cfg.seed
        ),
        capacity: Some(cfg.capacity),
        depot: Some(depot),
        customers,
    }
    .validated()
}

/// Samples the first instance of the stream (`index = 0`).
pub fn generate_instance(cfg: &GeneratorConfig) -> Result<ProblemInstance> {
    generate_instance_at(cfg, 0)
}

/// Samples `count` instances from consecutive stream indices.
pub fn generate_batch(cfg: &GeneratorConfig, count: usize) -> Result<Vec<ProblemInstance>> {
    (0..count as u64).map(|i| generate_instance_at(cfg, i)).collect()
}

/// Samples one TSP instance: `n` city locations uniform on the unit square.
pub fn generate_tsp_instance(n: usize, seed: u64, index: u64) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::Config("tsp instance needs at least 2 cities".into()));
    }
    let mut rng = rng::stream(seed, Domain::Generate, index);
    let customers = (0..n)
        .map(|_| CustomerSpec {
            location: Coord::new(rng.gen::<f64>(), rng.gen::<f64>()),
            demand: 0,
        })
        .collect();
    ProblemInstance {
        kind: Kind::Tsp,
        id: format!("tsp{n}-seed{seed}-{index:06}"),
        capacity: None,
        depot: None,
        customers,
    }
    .validated()
}
