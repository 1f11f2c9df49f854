use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}x{0} vs {1}x{1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("empty matrix")]
    Empty,

    #[error("{name} is not Hermitian (max |H_ij - conj(H_ji)| = {defect:e}, tolerance {tol:e})")]
    NotHermitian { name: String, defect: f64, tol: f64 },

    #[error("matrix is not anti-Hermitian (max |A_ij + conj(A_ji)| = {0:e})")]
    NotAntiHermitian(f64),

    #[error("not positive semidefinite: eigenvalue {0:e}")]
    NotPositiveSemidefinite(f64),

    #[error("trace is {0} (expected 1)")]
    InvalidTrace(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("eigensolver did not converge (residual {residual:e})")]
    EigenNonConvergence { residual: f64 },

    #[error("unitary check failed: max |U'U - I| = {0:e}")]
    NonUnitary(f64),

    #[error(
        "degenerate spectrum: eigenvalues #{i} = {lambda_i:e} and #{j} = {lambda_j:e} are closer than {tol:e}"
    )]
    DegenerateSpectrum {
        i: usize,
        j: usize,
        lambda_i: f64,
        lambda_j: f64,
        tol: f64,
    },

    #[error("rank change detected: off-support block of the derivative has norm {0:e}")]
    RankChangeDetected(f64),

    #[error("singular information matrix: eigenvalue {eigenvalue:e}, null direction {null_direction:?}")]
    SingularInformation {
        eigenvalue: f64,
        null_direction: Vec<f64>,
    },

    #[error("negative quantum Fisher information {0:e}")]
    NegativeInformation(f64),

    #[error("positivity violation: {0}")]
    PositivityViolation(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Guards that reflect a numerically ill-posed point rather than bad input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::DegenerateSpectrum { .. }
                | Error::RankChangeDetected(_)
                | Error::SingularInformation { .. }
                | Error::EigenNonConvergence { .. }
                | Error::NegativeInformation(_)
                | Error::NotApplicable(_)
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(..) => "DimensionMismatch",
            Error::NotSquare { .. } => "NotSquare",
            Error::Empty => "Empty",
            Error::NotHermitian { .. } => "HermiticityError",
            Error::NotAntiHermitian(_) => "NotAntiHermitian",
            Error::NotPositiveSemidefinite(_) => "NotPositiveSemidefinite",
            Error::InvalidTrace(_) => "InvalidTrace",
            Error::InvalidState(_) => "InvalidState",
            Error::EigenNonConvergence { .. } => "EigenNonConvergence",
            Error::NonUnitary(_) => "NonUnitary",
            Error::DegenerateSpectrum { .. } => "DegenerateSpectrum",
            Error::RankChangeDetected(_) => "RankChangeDetected",
            Error::SingularInformation { .. } => "SingularInformation",
            Error::NegativeInformation(_) => "NegativeInformation",
            Error::PositivityViolation(_) => "PositivityViolation",
            Error::NotApplicable(_) => "NotApplicable",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
