//! Continuous-time stochastic dispatch.
//!
//! Customers arrive according to a Poisson process with uniform locations
//! and integer demands, wait a fixed patience, and abandon if unserved. A
//! single vehicle moves at constant speed, delivering `min(load, demand)`
//! on reaching a customer and refilling at the depot. The system is
//! viewed as a discrete decision process on the event times: the next
//! decision happens at the earlier of the next arrival and the
//! completion of the chosen movement, so an arrival mid-travel interrupts
//! the vehicle at its interpolated position and the policy chooses again.
//!
//! Rewards are delivered units normalized by the elapsed time of the
//! transition.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::instances::{distance, Coord};
use crate::rng::{self, Domain};

/// Simulator parameters. Defaults follow the reference setup: unit
/// arrival rate on a 100-unit horizon, patience 5, speed 0.1, depot at
/// the center of the unit square.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SvrpConfig {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_rate")]
    pub arrival_rate: f64,
    #[serde(default = "default_patience")]
    pub patience: f64,
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default = "default_depot")]
    pub depot: [f64; 2],
    #[serde(default = "default_capacity")]
    pub capacity: u32,
    #[serde(default = "default_demand_lo")]
    pub demand_lo: u32,
    #[serde(default = "default_demand_hi")]
    pub demand_hi: u32,
    pub seed: u64,
}

fn default_horizon() -> f64 {
    100.0
}
fn default_rate() -> f64 {
    1.0
}
fn default_patience() -> f64 {
    5.0
}
fn default_speed() -> f64 {
    0.1
}
fn default_depot() -> [f64; 2] {
    [0.5, 0.5]
}
fn default_capacity() -> u32 {
    20
}
fn default_demand_lo() -> u32 {
    1
}
fn default_demand_hi() -> u32 {
    9
}

impl SvrpConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            horizon: default_horizon(),
            arrival_rate: default_rate(),
            patience: default_patience(),
            speed: default_speed(),
            depot: default_depot(),
            capacity: default_capacity(),
            demand_lo: default_demand_lo(),
            demand_hi: default_demand_hi(),
            seed,
        }
    }

    pub fn depot_coord(&self) -> Coord {
        Coord::new(self.depot[0], self.depot[1])
    }

    fn check(&self) -> Result<()> {
        let ok = self.horizon >= 0.0
            && self.arrival_rate > 0.0
            && self.patience > 0.0
            && self.speed > 0.0
            && self.capacity > 0
            && self.demand_lo >= 1
            && self.demand_lo <= self.demand_hi;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("svrp config fields must be positive".into()))
        }
    }
}

/// A customer currently waiting for service.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrpCustomer {
    /// Arrival ordinal; stable for the whole episode.
    pub id: usize,
    pub location: Coord,
    pub demand: u32,
    pub arrival_time: f64,
}

/// Dispatch decision at an epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SvrpAction {
    /// Drive to the customer with this id.
    Visit(usize),
    /// Drive to the depot and refill.
    Depot,
    /// Park at the current position until the next arrival.
    Stay,
}

/// One recorded simulator event, for JSON-Lines episode traces.
#[derive(Debug, Clone)]
pub struct SvrpEvent {
    pub clock: f64,
    pub event_kind: &'static str,
    pub payload: serde_json::Value,
}

/// Full simulator state at a decision epoch.
#[derive(Debug, Clone)]
pub struct SvrpState {
    pub config: SvrpConfig,
    pub clock: f64,
    pub active: Vec<SvrpCustomer>,
    pub vehicle: Coord,
    pub load: u32,
    pub satisfied_units: u64,
    /// Demand units of every customer that has arrived so far.
    pub arrived_units: u64,
    pub done: bool,
    pending: VecDeque<SvrpCustomer>,
    trace: Option<Vec<SvrpEvent>>,
}

/// Outcome of one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrpTransition {
    /// Delivered units divided by elapsed time.
    pub reward: f64,
    pub delivered: u32,
    pub elapsed: f64,
    /// The targeted customer abandoned before the vehicle arrived.
    pub stale: bool,
    pub done: bool,
}

/// Builds the `episode`-th episode of the seed's stream: the whole
/// arrival schedule is drawn up front, so a config and episode index name
/// the episode exactly.
pub fn svrp_reset(config: &SvrpConfig, episode: u64) -> Result<SvrpState> {
    config.check()?;
    let mut rng = rng::stream(config.seed, Domain::Arrivals, episode);
    let mut pending = VecDeque::new();
    let mut t = 0.0;
    let mut id = 0;
    loop {
        // Exponential inter-arrival; 1 - U keeps the argument in (0, 1].
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / config.arrival_rate;
        if t >= config.horizon {
            break;
        }
        let location = Coord::new(rng.gen::<f64>(), rng.gen::<f64>());
        let demand = rng.gen_range(config.demand_lo..=config.demand_hi);
        pending.push_back(SvrpCustomer { id, location, demand, arrival_time: t });
        id += 1;
    }
    Ok(SvrpState {
        clock: 0.0,
        active: Vec::new(),
        vehicle: config.depot_coord(),
        load: config.capacity,
        satisfied_units: 0,
        arrived_units: 0,
        done: config.horizon == 0.0,
        pending,
        trace: None,
        config: config.clone(),
    })
}

impl SvrpState {
    /// Start recording events; retrieve them with [`SvrpState::take_trace`].
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<SvrpEvent> {
        self.trace.take().unwrap_or_default()
    }

    fn record(&mut self, clock: f64, event_kind: &'static str, payload: serde_json::Value) {
        if let Some(trace) = &mut self.trace {
            trace.push(SvrpEvent { clock, event_kind, payload });
        }
    }

    /// Time of the next pending arrival, if any.
    fn next_arrival(&self) -> Option<f64> {
        self.pending.front().map(|c| c.arrival_time)
    }

    /// Remaining time before a customer abandons.
    pub fn remaining_patience(&self, customer: &SvrpCustomer) -> f64 {
        customer.arrival_time + self.config.patience - self.clock
    }

    fn drain_arrivals(&mut self, up_to: f64) {
        while self.pending.front().is_some_and(|c| c.arrival_time <= up_to) {
            let c = self.pending.pop_front().unwrap();
            self.arrived_units += u64::from(c.demand);
            self.record(
                c.arrival_time,
                "arrival",
                serde_json::json!({"id": c.id, "xy": [c.location.x, c.location.y], "demand": c.demand}),
            );
            self.active.push(c);
        }
    }

    fn expire(&mut self, now: f64) {
        let patience = self.config.patience;
        let mut expired = Vec::new();
        self.active.retain(|c| {
            if now - c.arrival_time >= patience {
                expired.push((c.arrival_time + patience, c.id));
                false
            } else {
                true
            }
        });
        for (at, id) in expired {
            self.record(at, "abandon", serde_json::json!({"id": id}));
        }
    }
}

/// Advances the simulator to the next decision epoch under `action`.
///
/// Targeting a customer id that is not currently active is a stale-action
/// error and leaves the state untouched; a customer that abandons while
/// the vehicle is en route yields a normal transition flagged `stale`
/// with nothing delivered.
pub fn svrp_step(state: &mut SvrpState, action: SvrpAction) -> Result<SvrpTransition> {
    if state.done {
        return Err(Error::TerminalState);
    }
    let start = state.clock;
    let mut delivered = 0u32;
    let mut stale = false;

    let target: Option<(Coord, Option<usize>)> = match action {
        SvrpAction::Visit(id) => {
            let customer = state
                .active
                .iter()
                .find(|c| c.id == id)
                .ok_or(Error::StaleAction { customer: id })?;
            Some((customer.location, Some(id)))
        }
        SvrpAction::Depot => Some((state.config.depot_coord(), None)),
        SvrpAction::Stay => None,
    };
    state.record(
        start,
        "dispatch",
        match action {
            SvrpAction::Visit(id) => serde_json::json!({"action": "visit", "id": id}),
            SvrpAction::Depot => serde_json::json!({"action": "depot"}),
            SvrpAction::Stay => serde_json::json!({"action": "stay"}),
        },
    );

    // Instant completions (target at the current position) take effect now
    // and the vehicle then waits like a parked one, so time always advances.
    let mut travel: Option<(Coord, Option<usize>, f64)> = None;
    if let Some((point, customer)) = target {
        let time = distance(state.vehicle, point) / state.config.speed;
        if time > 0.0 {
            travel = Some((point, customer, start + time));
        } else {
            delivered += complete(state, start, point, customer, &mut stale);
        }
    }

    let arrival = state.next_arrival().unwrap_or(f64::INFINITY);
    let completion = travel.as_ref().map_or(f64::INFINITY, |&(_, _, at)| at);
    let horizon = state.config.horizon;
    let epoch = arrival.min(completion).min(horizon);

    // Move the vehicle along its heading for the elapsed time.
    if let Some((point, _, at)) = travel {
        if epoch >= at {
            state.vehicle = point;
        } else {
            let frac = (epoch - start) / (at - start);
            state.vehicle = Coord::new(
                state.vehicle.x + (point.x - state.vehicle.x) * frac,
                state.vehicle.y + (point.y - state.vehicle.y) * frac,
            );
        }
    }
    state.clock = epoch;
    state.drain_arrivals(epoch);
    state.expire(epoch);
    if let Some((point, customer, at)) = travel {
        if epoch >= at {
            delivered += complete(state, epoch, point, customer, &mut stale);
        }
    }
    if epoch >= horizon {
        state.done = true;
        state.record(horizon, "horizon", serde_json::json!({}));
    }

    let elapsed = state.clock - start;
    Ok(SvrpTransition {
        reward: if elapsed > 0.0 { f64::from(delivered) / elapsed } else { 0.0 },
        delivered,
        elapsed,
        stale,
        done: state.done,
    })
}

fn complete(
    state: &mut SvrpState,
    now: f64,
    point: Coord,
    customer: Option<usize>,
    stale: &mut bool,
) -> u32 {
    state.vehicle = point;
    match customer {
        None => {
            state.load = state.config.capacity;
            state.record(now, "refill", serde_json::json!({"load": state.load}));
            0
        }
        Some(id) => match state.active.iter_mut().find(|c| c.id == id) {
            None => {
                *stale = true;
                state.record(now, "stale_arrival", serde_json::json!({"id": id}));
                0
            }
            Some(c) => {
                let units = c.demand.min(state.load);
                c.demand -= units;
                state.load -= units;
                state.satisfied_units += u64::from(units);
                let emptied = c.demand == 0;
                state.record(now, "deliver", serde_json::json!({"id": id, "units": units}));
                if emptied {
                    state.active.retain(|c| c.id != id);
                }
                units
            }
        },
    }
}

/// Writes an episode trace as JSON Lines `{clock, event_kind, payload}`.
pub fn write_svrp_trace<P: AsRef<std::path::Path>>(path: P, events: &[SvrpEvent]) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in events {
        let line = serde_json::json!({
            "clock": e.clock,
            "event_kind": e.event_kind,
            "payload": e.payload,
        });
        serde_json::to_writer(&mut w, &line)
            .map_err(|err| Error::Parse { line: 0, detail: err.to_string() })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
