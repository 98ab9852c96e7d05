use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("index out of bounds: {0}")]
    Bounds(String),
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("Pauli exclusion: fermions cannot share momentum {0}")]
    PauliExclusion(i32),
    #[error("initial state truncated: weight {weight:e} beyond |n| = {n_max} exceeds 1e-3")]
    Truncation { weight: f64, n_max: i32 },
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },
    #[error("norm grew from {before} to {after} at t = {t}; effective Hamiltonian is not contractive")]
    NonContractivity { t: f64, before: f64, after: f64 },
    #[error("distribution not normalized: sum = {0}")]
    Normalization(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{failed} of {total} trajectories failed; first: {first}")]
    Ensemble {
        failed: usize,
        total: usize,
        first: String,
    },
}
