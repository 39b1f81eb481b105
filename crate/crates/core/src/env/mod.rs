//! Decision-process environments and solution evaluation.
//!
//! [`cvrp`] is the main environment: a vehicle with finite load serves
//! integer demands, refilling at the depot, with a feasibility mask that
//! guarantees any masked-compliant policy produces a valid tour. [`tsp`]
//! is the single-route test-bed, and [`svrp`] the continuous-time
//! dispatch simulator with Poisson arrivals and impatient customers.

pub mod cvrp;
pub mod solution;
pub mod svrp;
pub mod tsp;

pub use cvrp::{feasible_mask, reset, step, tour_length, validate_solution, CvrpState, FeasibilityReport};
pub use solution::{read_solutions, write_solutions, Solution};
pub use svrp::{svrp_reset, svrp_step, SvrpAction, SvrpConfig, SvrpCustomer, SvrpState, SvrpTransition};
pub use tsp::{tsp_mask, tsp_reset, tsp_step, tsp_tour_length, TspState};
