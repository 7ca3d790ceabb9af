//! Gaussian simulation and gradient training of quantum optical recurrent neural networks.

pub mod error;
pub mod channel;
pub mod circuit;
pub mod gaussian;
pub mod linalg;
pub mod optim;
pub mod stream;
pub mod tasks;
pub mod tdm;

pub use error::{Error, Result};
pub use gaussian::GaussianState;
pub use circuit::{Gate, SymplecticCircuit};
pub use stream::{Qornn, Stream, Transfer};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
