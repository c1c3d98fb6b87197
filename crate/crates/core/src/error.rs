use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("unsupported derivative order {0} (expected 1 or 2)")]
    InvalidOrder(u32),

    #[error("nonlinearity coefficient of component {component} is zero")]
    ZeroNonlinearity { component: usize },

    #[error("analytic solitons require unit propagation constants, got ({0}, {1})")]
    NonUnitPropagation(f64, f64),

    #[error(
        "amplitude constraints disagree: component 1 gives {first}, component 2 gives {second} \
         (relative mismatch {relative:.3e})"
    )]
    InconsistentConstraints {
        first: f64,
        second: f64,
        relative: f64,
    },

    #[error("no real amplitude: {0}")]
    NoRealAmplitude(String),

    #[error("invalid amplitude {0}: must be finite and nonnegative")]
    InvalidAmplitude(f64),

    #[error("matrix of order {order} exceeds the dense eigensolver limit {limit}")]
    MatrixTooLarge { order: usize, limit: usize },

    #[error("eigensolver failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error("empty eigenvalue list")]
    EmptySpectrum,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "time step {dt} violates the RK4 stability guard: dt * k_max^2 = {product:.3} > {limit}"
    )]
    StabilityGuard { dt: f64, product: f64, limit: f64 },

    #[error("solution blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("schedule evaluated at t = {t} outside [0, {end}]")]
    ScheduleOutOfRange { t: f64, end: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
