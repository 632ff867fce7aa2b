use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("invalid rotor spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid unit bridge: {0}")]
    InvalidUnits(String),

    #[error("invalid pulse train: {0}")]
    InvalidTrain(String),

    #[error("quadrature order {order} is exact only to degree {exact}, need degree {needed}")]
    QuadratureOrder { order: usize, exact: usize, needed: usize },

    #[error("eigendecomposition did not converge for {0}")]
    Eigen(String),

    #[error("operator is not unitary on the interior: residual {residual:e} at J={j}")]
    NotUnitary { j: u32, residual: f64 },

    #[error("eigenvector residual {residual:e} for quasienergy {omega} exceeds {tolerance:e}")]
    Residual { omega: f64, residual: f64, tolerance: f64 },

    #[error("edge windows overlap: lower window ends at J={lower_end}, upper starts at J={upper_start}")]
    OverlappingWindows { lower_end: u32, upper_start: u32 },

    #[error("truncation guard violated at cycle {cycle}: top-edge population {population:e}; enlarge J_max")]
    TruncationGuard { cycle: usize, population: f64 },

    #[error("step size rejected: {0}")]
    StepSize(String),

    #[error("sampling too coarse: {samples} samples given, at least {required} needed")]
    Nyquist { samples: usize, required: usize },

    #[error("broadening {broadening} is narrower than the resolution limit {limit}")]
    Unresolvable { broadening: f64, limit: f64 },

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("invalid temperature {0} K")]
    Temperature(f64),

    #[error("missing input: {0}")]
    Missing(String),

    #[error("invalid state: {0}")]
    InvalidState(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Eigen(_)
                | Error::NotUnitary { .. }
                | Error::Residual { .. }
                | Error::TruncationGuard { .. }
        )
    }
}
