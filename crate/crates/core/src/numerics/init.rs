use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NumericsError, Tensor};

/// Xavier/Glorot uniform initialization for a `(fan_in, fan_out)` matrix:
/// samples are uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_init(shape: &[usize], seed: u64) -> Result<Tensor, NumericsError> {
    xavier_init_with(shape, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn xavier_init_with<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Result<Tensor, NumericsError> {
    let [fan_in, fan_out] = shape else {
        return Err(NumericsError::Rank {
            expected: 2,
            shape: shape.to_vec(),
        });
    };
    if fan_in + fan_out == 0 {
        return Err(NumericsError::Empty("xavier_init"));
    }
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Ok(uniform_init(shape, bound, rng))
}

pub fn uniform_init<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.gen_range(-bound..=bound);
    }
    t
}
