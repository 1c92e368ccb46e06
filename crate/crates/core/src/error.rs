use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("axis {axis}: {points} points (need 1 for an inactive axis or at least 4)")]
    InvalidPoints { axis: usize, points: usize },
    #[error("axis {axis}: extent {extent} must be positive and finite")]
    InvalidExtent { axis: usize, extent: f64 },
    #[error("axis {axis}: {points} points cannot carry an order-{order} stencil")]
    StencilTooWide { axis: usize, points: usize, order: usize },
    #[error("field length {got} does not match grid ({expected})")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("singular metric at point {point} (|det| = {det:e})")]
    SingularMetric { point: usize, det: f64 },
    #[error("metric at point {point} is not Lorentzian (eigenvalues {eigenvalues:?})")]
    NotLorentzian { point: usize, eigenvalues: [f64; 4] },
    #[error("negative energy density {0}")]
    NegativeDensity(f64),
    #[error("negative Makino variable {0}")]
    NegativeMakino(f64),
    #[error("invalid equation of state: {0}")]
    InvalidEos(String),
    #[error("four-velocity not normalized at point {point}: g(u,u)+1 = {residual:e}")]
    NotNormalized { point: usize, residual: f64 },
    #[error("four-velocity past-directed at point {point} (u0 = {u0})")]
    PastDirected { point: usize, u0: f64 },
    #[error("causality violated at point {point}: sigma^2 = {sigma2}")]
    CausalityViolation { point: usize, sigma2: f64 },
    #[error("fluid system not hyperbolic at point {point}: A0 not positive definite")]
    NonHyperbolic { point: usize },
    #[error("lapse degenerate at point {point}: g^00 = {g00_upper:e}")]
    SingularLapse { point: usize, g00_upper: f64 },
    #[error("A0 indefinite at point {point} (t = {t}): min eigenvalue {min_eig:e}")]
    IndefiniteA0 { t: f64, point: usize, min_eig: f64 },
    #[error("spatial metric not positive definite at point {point}")]
    NotPositiveDefinite { point: usize },
    #[error("operation needs a uniform periodic grid")]
    NonUniformGrid,
    #[error("dyadic tail not converged at j_max = {j_max}: last shell carries {fraction:e} of the sum")]
    TailNotConverged { j_max: usize, fraction: f64 },
    #[error("energy weight not positive definite at point {point}")]
    IndefiniteWeight { point: usize },
    #[error("CFL violated: dt = {dt} exceeds {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("non-finite value at t = {t}, point {point}, component {component}")]
    NonFinite { t: f64, point: usize, component: usize },
    #[error("u0 = {u0} below {min} at point {point}")]
    LapseCollapse { point: usize, u0: f64, min: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

impl Error {
    /// Attaches a grid point index to pointwise errors.
    pub fn at(self, p: usize) -> Self {
        use Error::*;
        match self {
            SingularMetric { det, .. } => SingularMetric { point: p, det },
            NotLorentzian { eigenvalues, .. } => NotLorentzian { point: p, eigenvalues },
            NotNormalized { residual, .. } => NotNormalized { point: p, residual },
            PastDirected { u0, .. } => PastDirected { point: p, u0 },
            CausalityViolation { sigma2, .. } => CausalityViolation { point: p, sigma2 },
            NonHyperbolic { .. } => NonHyperbolic { point: p },
            SingularLapse { g00_upper, .. } => SingularLapse { point: p, g00_upper },
            IndefiniteA0 { t, min_eig, .. } => IndefiniteA0 { t, point: p, min_eig },
            NotPositiveDefinite { .. } => NotPositiveDefinite { point: p },
            IndefiniteWeight { .. } => IndefiniteWeight { point: p },
            LapseCollapse { u0, min, .. } => LapseCollapse { point: p, u0, min },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
