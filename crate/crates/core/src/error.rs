use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("subsystem {index} is not a {expected}")]
    InvalidSubsystem { index: usize, expected: &'static str },
    #[error("truncation must be at least 1 (got {0})")]
    InvalidTruncation(usize),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("operator is not Hermitian (max |M - M^dag| = {0:e})")]
    NotHermitian(f64),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("drive resonance violated: omega_1 - omega_2 = {diff}, expected 2*Omega_1 = {expected}")]
    ResonanceMismatch { diff: f64, expected: f64 },
    #[error("ancilla frequency is resonant with the mode (singular detuning)")]
    SingularDetuning,
    #[error("time step {dt} exceeds the allowed maximum {max}")]
    StepTooCoarse { dt: f64, max: f64 },
    #[error("displacement loop not closed: reduced purity {purity}")]
    LoopNotClosed { purity: f64 },
    #[error("steady state is not unique: second-smallest singular value {sigma:e}")]
    NonUniqueSteadyState { sigma: f64 },
    #[error("population {population:e} leaked into the top Fock levels")]
    TruncationLeak { population: f64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 parse, 3 numeric, 4 precondition.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 2,
            Error::NotHermitian(_)
            | Error::LoopNotClosed { .. }
            | Error::NonUniqueSteadyState { .. }
            | Error::TruncationLeak { .. }
            | Error::Numeric(_) => 3,
            Error::Io(_) => 1,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
