use thiserror::Error;

/// Errors raised while building scenes, stepping, or differentiating rollouts.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("degenerate triangle {0} in rest configuration")]
    DegenerateTriangle(usize),
    #[error("degenerate tetrahedron {0} in rest configuration")]
    DegenerateTet(usize),
    #[error("invalid mesh connectivity: {0}")]
    Connectivity(String),
    #[error("vertex {0} has zero lumped mass")]
    ZeroMass(usize),
    #[error("invalid material parameter: {0}")]
    Material(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("spatial hash cell size {cell:e} must exceed {required:e}")]
    HashCellTooSmall { cell: f64, required: f64 },
    #[error("linear solve failed after regularization")]
    LinearSolve,
    #[error("action component {index} = {value:e} exceeds clamp {clamp:e}")]
    ActionOutOfRange { index: usize, value: f64, clamp: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parameter {0} is not differentiable: {1}")]
    NonDifferentiable(String, String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("obj parse error on line {line}: {message}")]
    Obj { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
