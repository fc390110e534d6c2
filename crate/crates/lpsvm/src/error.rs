use thiserror::Error;

/// Errors produced by the lpsvm crate.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid norm parameter: {0}")]
    InvalidNormParam(String),

    #[error("multinomial coefficient overflows integer width for degree {degree}")]
    DegreeOverflow { degree: u32 },

    #[error("degree mismatch: |gamma| + lambda = {got}, expected {expected}")]
    DegreeMismatch { got: u32, expected: u32 },

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("invalid conic program: {0}")]
    InvalidProgram(String),

    #[error("conic solve failed: {0}")]
    SolverFailure(String),

    #[error("problem is infeasible")]
    Infeasible,

    #[error("iteration limit reached without convergence")]
    IterationLimit,

    #[error("gradient undefined on a sign-cell boundary (coordinate {feature})")]
    CellBoundary { feature: usize },

    #[error("no strictly interior support vector: every alpha_i is at 0 or C")]
    NoInteriorSupportVector,

    #[error("relaxation order {t} below minimum {t_min}")]
    OrderTooLow { t: usize, t_min: usize },

    #[error("moment entry for a degree-{degree} index is not available (stored up to degree {max_degree})")]
    MissingMomentEntry { degree: u32, max_degree: u32 },

    #[error("tensor row {row} has zero norm")]
    ZeroRow { row: usize },

    #[error(
        "sign condition violated for cell {cell}, component {component} at a sampled multiplier"
    )]
    ConditionViolated { cell: usize, component: usize },

    #[error("negative eigenvalue {value} rejected for even-order transform recovery")]
    NegativeEigenvalue { value: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
