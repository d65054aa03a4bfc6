//! Numerical primitives shared by every other module.

mod rng;
mod special;
mod vector;

pub use rng::{derive_stream, sample_gaussian, sample_gumbel, Party, RngStream, StreamTag};
pub use special::q_function;
pub use vector::ParamVector;
