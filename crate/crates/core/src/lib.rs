pub mod bounds;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod green;
pub mod grid;
pub mod kernels;
pub mod noise;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
