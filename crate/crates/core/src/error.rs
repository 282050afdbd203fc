use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimError { expected: usize, got: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("not a point of the probability simplex: {0}")]
    InvalidSimplex(String),

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("solver did not terminate after {0} iterations")]
    IterationLimit(usize),

    #[error("word {0} has a positive count but a zero row in the topic matrix")]
    InfeasibleRow(usize),

    #[error("no word has positive fitted probability")]
    DegenerateSupport,

    #[error("information matrix is singular (rank {rank} < {dim})")]
    SingularInformation { rank: usize, dim: usize },

    #[error("weighted design matrix is singular (rank {rank} < {dim})")]
    SingularDesign { rank: usize, dim: usize },
}

impl Error {
    /// Numerical failures (as opposed to bad input) map to a distinct exit status in the CLI.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Unbounded
                | Error::Infeasible
                | Error::IterationLimit(_)
                | Error::DegenerateSupport
                | Error::SingularInformation { .. }
                | Error::SingularDesign { .. }
        )
    }
}
