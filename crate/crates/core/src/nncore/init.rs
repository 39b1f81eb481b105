//! Parameter initialization.

use rand::Rng;

use super::tensor::Tensor;

/// Xavier (Glorot) uniform: entries drawn from
/// `±sqrt(6 / (fan_in + fan_out))` with `fan_in = rows`,
/// `fan_out = cols`.
pub fn xavier_init<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut t = Tensor::zeros(rows, cols);
    for v in t.data_mut() {
        *v = rng.gen_range(-bound..=bound);
    }
    t
}
