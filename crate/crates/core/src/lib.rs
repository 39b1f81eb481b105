//! Vehicle-routing toolkit built around a single design: treat route
//! construction as a sequential decision process and let every solver —
//! learned or classical — produce tours that the same environment can
//! verify.
//!
//! The crate is organized as:
//!
//! - [`instances`]: problem generation on the unit square, distance
//!   geometry, and JSON-Lines persistence.
//! - [`env`]: the capacitated-VRP decision process with feasibility
//!   masking (plus a TSP test-bed and a continuous-time stochastic
//!   variant), tour evaluation, and solution validation.
//! - [`heuristics`]: randomized Clarke-Wright savings, randomized Sweep
//!   with an exact TSP subsolver, exact small-instance oracles, and
//!   rule-based dispatch baselines for the stochastic variant.
//! - [`nncore`]: a small reverse-mode gradient tape over dense `f64`
//!   tensors, with initializers, optimizers, and checkpointing.
//! - [`policy`]: the attention pointer model (shared embeddings, an LSTM
//!   decoder, and a two-stage attention head) with greedy, sampling, and
//!   beam-search rollout drivers.
//! - [`training`]: REINFORCE with a learned critic baseline, and an
//!   asynchronous advantage actor-critic trainer for the stochastic
//!   dispatch problem.
//! - [`bench`]: the benchmark harness behind the `vrpkit` CLI.
//!
//! All randomness flows through seeded ChaCha8 streams (see [`rng`]), so
//! every entry point is reproducible from its seed.

pub mod bench;
pub mod env;
pub mod error;
pub mod heuristics;
pub mod instances;
pub mod nncore;
pub mod policy;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
