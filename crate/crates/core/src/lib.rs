pub mod bench;
pub mod bundle;
pub mod error;
pub mod features;
pub mod nn;
pub mod pinn;
pub mod rng;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
