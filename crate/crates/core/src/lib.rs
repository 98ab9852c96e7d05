//! Quantum-trajectory simulation of two indistinguishable particles cooled
//! by one (linear) or two (ring) cavity modes.
//!
//! Units throughout: `ħ = 1`, recoil frequency `ω_R = 1`, momenta in units of
//! `ħk`. Energies are therefore in recoil energies and times in `1/ω_R`.
//!
//! The crate is `no_std` and only needs `alloc`. Parallel execution, file
//! formats and the command line live in the `cavity-cool` crate.
#![no_std]

extern crate alloc;

pub mod ensemble;
pub mod error;
pub mod hilbert;
pub mod integrator;
pub mod model;
pub mod observables;
pub mod operators;
pub mod oracle;
pub mod protocol;
pub mod sparse;
pub mod trajectory;

pub use error::{Error, Result};
pub use hilbert::{BasisIndex, ExchangeSymmetry, Geometry, HilbertDims, StateVector};
pub use model::{DriveParams, PhysicalParams};
pub use sparse::SparseOperator;

pub use num_complex::Complex64;

/// Random number generator used for every trajectory.
pub type TrajectoryRng = rand_chacha::ChaCha8Rng;

/// Seeds the generator of one trajectory.
pub fn trajectory_rng(seed: u64) -> TrajectoryRng {
    use rand::SeedableRng;
    TrajectoryRng::seed_from_u64(seed)
}

/// An independent stream of the same seed; stream 0 is `trajectory_rng`.
pub fn trajectory_stream(seed: u64, stream: u64) -> TrajectoryRng {
    let mut rng = trajectory_rng(seed);
    rng.set_stream(stream);
    rng
}
