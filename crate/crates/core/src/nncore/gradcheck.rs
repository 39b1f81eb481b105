//! Central-difference gradient verification.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::store::ParamStore;
use super::tape::{NodeId, Tape};
use crate::error::Result;

/// Coordinates checked per parameter before sampling kicks in.
const COORD_LIMIT: usize = 200;

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences and returns the maximum relative error,
/// `|a - n| / max(|a|, |n|, 1)`.
///
/// `build` constructs the function on a tape, registering whatever
/// parameters it reads from the store (via [`Tape::param`]) under their
/// store names; only those parameters are checked. Tensors larger than
/// 200 values are checked on a seeded random subset of 200 coordinates.
pub fn grad_check<F>(build: F, store: &ParamStore, epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<NodeId>,
{
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let out = build(&mut tape, s)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let out = build(&mut tape, store)?;
    let analytic = tape.backward(out, 1.0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x67726164);
    let mut max_rel = 0.0f64;
    for (name, grad) in &analytic {
        let coords: Vec<usize> = if grad.len() <= COORD_LIMIT {
            (0..grad.len()).collect()
        } else {
            let mut all: Vec<usize> = (0..grad.len()).collect();
            all.shuffle(&mut rng);
            all.truncate(COORD_LIMIT);
            all
        };
        for idx in coords {
            let mut plus = store.clone();
            plus.update(name, |t| t.data_mut()[idx] += epsilon)?;
            let mut minus = store.clone();
            minus.update(name, |t| t.data_mut()[idx] -= epsilon)?;
            let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * epsilon);
            let a = grad.data()[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}
