use alloc::string::String;

/// Errors raised by the model and the optimizers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate geometry: user coincides with base station {bs}")]
    DegenerateGeometry { bs: usize },
    #[error("intra-cell angle {angle} rad outside (0, pi) for cell {cell} user {user}")]
    AngleOutOfRange { cell: usize, user: usize, angle: f64 },
    #[error("rotation {value} rad for cell {cell} outside [{min}, {max}]")]
    RotationOutOfRange {
        cell: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("degenerate: quadratic phase vanishes (sin(phi - theta) = 0)")]
    VanishingQuadraticPhase,
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("ZF infeasible: effective channel matrix of cell {cell} is singular")]
    ZfInfeasible { cell: usize },
    #[error("convex subproblem did not converge after {iterations} Newton steps (residual {residual:e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },
    #[error("too many cells for exhaustive rotation enumeration: {cells} (max {max})")]
    EnumerationTooLarge { cells: usize, max: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
