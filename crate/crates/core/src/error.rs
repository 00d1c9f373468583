use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("speed {speed} below model floor {floor}")]
    SpeedBelowFloor { speed: f64, floor: f64 },
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("invalid state bounds: {0}")]
    InvalidBounds(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polytope needs at least 3 faces, got {0}")]
    TooFewFaces(usize),
    #[error("face {0} has a zero or non-finite normal")]
    DegenerateNormal(usize),
    #[error("polytope is empty or unbounded")]
    EmptyOrUnbounded,
    #[error("normal and offset counts differ ({normals} vs {offsets})")]
    LengthMismatch { normals: usize, offsets: usize },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualityError {
    #[error("dual block sizes ({fwd}, {rev}) do not match face counts ({faces_fwd}, {faces_rev})")]
    DimensionMismatch { fwd: usize, rev: usize, faces_fwd: usize, faces_rev: usize },
    #[error("separating direction is degenerate (|s| = {0})")]
    DegenerateDirection(f64),
    #[error("dual block does not certify separation: {0}")]
    NotSeparating(String),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("scenario is invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TranscriptionError {
    #[error("scenario has no vehicles")]
    NoVehicles,
    #[error("invalid transcription config: {0}")]
    InvalidConfig(String),
    #[error("decision vector has length {got}, layout expects {expected}")]
    LayoutMismatch { got: usize, expected: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("non-finite value in {what} (index {index})")]
    NonFinite { what: &'static str, index: usize },
    #[error("KKT factorization failed: {0}")]
    Factorization(String),
    #[error("initial point has length {got}, problem expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
}

/// Failures of an end-to-end run. Each maps to a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Transcription(#[from] TranscriptionError),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl HarnessError {
    pub const EXIT_INVALID: i32 = 2;
    pub const EXIT_SOLVER: i32 = 3;
    pub const EXIT_CERTIFICATION: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Scenario(_) | HarnessError::Transcription(_) => Self::EXIT_INVALID,
            HarnessError::Solver(_) => Self::EXIT_SOLVER,
            HarnessError::Certification(_) => Self::EXIT_CERTIFICATION,
            HarnessError::Io { .. } => 1,
        }
    }
}

impl From<SolverError> for HarnessError {
    fn from(e: SolverError) -> Self {
        HarnessError::Solver(e.to_string())
    }
}
