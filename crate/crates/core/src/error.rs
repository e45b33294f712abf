use thiserror::Error;

/// Errors produced by the library's pure operations.
///
/// Run-level failures (SoC bound violations, diverging integration) carry a
/// partial trace and live in [`crate::engine::RunFailure`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("adjacency must be symmetric: a[{i}][{j}] differs from a[{j}][{i}]")]
    AsymmetricAdjacency { i: usize, j: usize },

    #[error("adjacency diagonal must be zero: unit {unit} has a self-loop")]
    SelfLoop { unit: usize },

    #[error("adjacency entries must be 0 or 1: a[{i}][{j}] = {value}")]
    NotZeroOne { i: usize, j: usize, value: f64 },

    #[error("communication graph must be undirected and connected")]
    Disconnected,

    #[error("desired power must be known by at least one unit: no leader configured")]
    NoLeader,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric within tolerance {tol:e}")]
    AsymmetricMatrix { tol: f64 },

    #[error("no spectral gap above {tol:e}: graph is disconnected or matrix has no positive eigenvalue")]
    NoSpectralGap { tol: f64 },

    #[error("{name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },

    #[error("{name} must be finite (got {value})")]
    NonFinite { name: &'static str, value: f64 },

    #[error("empty measurement window")]
    EmptyWindow,

    #[error("invalid battery parameters: {0}")]
    InvalidBattery(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("allocation denominator is zero: all unit states are zero")]
    ZeroDenominator,
}

pub type Result<T> = std::result::Result<T, Error>;
