//! Gaussian random matrix models for q-deformed Gaussian variables.
//!
//! The crate builds random Hermitian matrices as weighted sums of
//! Kronecker-embedded standard Hermitian blocks, estimates their trace
//! moments and spectra, and checks them against exact combinatorial oracles:
//! pair-partition sums, tensor contractions and the `ν_q` density.

pub mod cli;
pub mod error;
pub mod gamma;
pub mod matrix;
pub mod output;
pub mod partition;
pub mod pauli;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod subset;
pub mod tensor;
pub mod weights;

pub use error::{Error, Result};
pub use gamma::GammaSpec;
pub use partition::PairPartition;
pub use subset::Subset;
pub use weights::WeightScheme;
