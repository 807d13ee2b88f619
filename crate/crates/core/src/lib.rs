pub mod checkpoint;
pub mod dataset;
pub mod embedding;
pub mod encoder;
mod error;
pub mod filter;
pub mod kg;
pub mod numerics;
pub mod pipeline;
pub mod reasoner;
pub mod synth;

pub use error::{Error, Result};
