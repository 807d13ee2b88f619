//! Dense tensors, a reverse-mode tape, initializers and optimizers.

mod init;
mod optim;
mod params;
mod tape;
mod tensor;

pub mod gradcheck;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use init::{uniform_init, xavier_init, xavier_init_with};
pub use optim::{Optimizer, OptimizerKind, OptimizerSettings};
pub use params::Parameters;
pub use tape::{sigmoid, softplus, Activation, Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} needs {} values, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("expected a rank-{expected} tensor, got shape {shape:?}")]
    Rank { expected: usize, shape: Vec<usize> },
    #[error("rows of unequal length")]
    Ragged,
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("{0} requires a non-empty input")]
    Empty(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("backward root must hold one value, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("truncated tensor bytes")]
    Truncated,
}

impl NumericsError {
    pub(crate) fn shape_mismatch(op: &'static str, left: &Tensor, right: &Tensor) -> Self {
        NumericsError::ShapeMismatch {
            op,
            left: left.shape().to_vec(),
            right: right.shape().to_vec(),
        }
    }
}

/// Softmax over all elements, shifted by the maximum for stability.
pub fn softmax_values(x: &Tensor) -> Result<Tensor, NumericsError> {
    if x.is_empty() {
        return Err(NumericsError::Empty("softmax"));
    }
    if !x.is_finite() {
        return Err(NumericsError::NonFinite("softmax input"));
    }
    let max = x.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = x.map(|v| (v - max).exp());
    let z = exps.sum();
    Ok(exps.map(|v| v / z))
}

/// Inverted dropout: zero each element with probability `rate` and scale
/// survivors by `1 / (1 - rate)`. Identity when `training` is false.
pub fn dropout<'t>(x: Var<'t>, rate: f64, training: bool, seed: u64) -> Result<Var<'t>, NumericsError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NumericsError::InvalidParameter {
            name: "dropout rate",
            value: rate,
        });
    }
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let shape = x.value().shape().to_vec();
    let mask = dropout_mask(&shape, rate, seed);
    x.mul(x.tape().constant(mask))
}

/// The scaled keep-mask used by [`dropout`].
pub fn dropout_mask(shape: &[usize], rate: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 / (1.0 - rate);
    let mut mask = Tensor::zeros(shape);
    for v in mask.data_mut() {
        *v = if rng.gen::<f64>() < rate { 0.0 } else { keep };
    }
    mask
}
