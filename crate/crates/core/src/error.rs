//! Crate-wide error type and exit-code mapping.

/// All failure modes surfaced by the solvers and the I/O layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An iterative solve exhausted its iteration budget.
    #[error("{stage}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A beam load contained NaN or infinite samples.
    #[error("beam load contains non-finite samples")]
    InvalidLoad,

    /// Two profiles or fields that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The discrete bilaplacian with the requested end conditions is singular.
    #[error("singular beam operator: {0}")]
    SingularOperator(String),

    /// Obstacle extents violate the channel bounds.
    #[error("obstacle out of bounds: {0}")]
    ObstacleOutOfBounds(String),

    /// A geometric precondition failed (attachment angle, cutoff sizing, ...).
    #[error("geometry error: {0}")]
    GeometryError(String),

    /// det J_h dropped to zero or below somewhere in the channel.
    #[error("degenerate jacobian: min det J = {min_det:.6e} at cell {cell:?}")]
    DegenerateJacobian { min_det: f64, cell: (usize, usize, usize) },

    /// The inner linear solver stagnated before reaching its target.
    #[error("linear solve failure: {stage} stalled at residual {residual:.3e} (target {target:.3e})")]
    LinearSolveFailure {
        stage: &'static str,
        residual: f64,
        target: f64,
    },

    /// A lift quadrature point left the fluid mask entirely.
    #[error("interpolation out of domain at ({x:.4}, {y:.4}, {z:.4}): grid too coarse around the obstacle")]
    InterpolationOutOfDomain { x: f64, y: f64, z: f64 },

    /// A beam profile violates the collision clearance bound.
    #[error("inadmissible beam profile: |h|_inf = {h_inf:.6e} exceeds the clearance bound {bound:.6e}")]
    InadmissibleProfile { h_inf: f64, bound: f64 },

    /// A symmetry check was requested on an asymmetric configuration.
    #[error("configuration is not symmetric: {0}")]
    ConfigNotSymmetric(String),

    /// Parity residuals are undefined on this grid/mask.
    #[error("parity undefined: {0}")]
    ParityUndefined(String),

    /// Malformed run-configuration document.
    #[error("config parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    /// Well-formed config with an out-of-range or inconsistent value.
    #[error("config validation error for key `{key}`: {message}")]
    ValidationError { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit-code category: 2 validation, 3 solver, 4 geometry, 5 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ParseError { .. }
            | Error::ValidationError { .. }
            | Error::InvalidLoad
            | Error::GridMismatch(_)
            | Error::SingularOperator(_)
            | Error::ParityUndefined(_) => 2,
            Error::NonConvergence { .. } | Error::LinearSolveFailure { .. } => 3,
            Error::ObstacleOutOfBounds(_)
            | Error::GeometryError(_)
            | Error::DegenerateJacobian { .. }
            | Error::InterpolationOutOfDomain { .. }
            | Error::InadmissibleProfile { .. }
            | Error::ConfigNotSymmetric(_) => 4,
            Error::Io(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
