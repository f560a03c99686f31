use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error("{0}")]
    Classification(String),

    #[error("open-problem boundary: p = {p} equals the threshold {threshold}")]
    OpenProblemBoundary { p: String, threshold: String },

    #[error("below threshold: p = {p} < {threshold}; no positive solution exists")]
    BelowThreshold { p: String, threshold: String },

    #[error("A_mu diverges for mu = {mu} >= N = {n}")]
    Divergent { mu: f64, n: u32 },

    #[error("quadrature tolerance {requested:e} not met, achieved {achieved:e}")]
    Tolerance { requested: f64, achieved: f64 },

    #[error("non-finite potential value at r = {0}")]
    NonFinitePotential(f64),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("operator self-test failed (max rel. error {max_rel:e} at r = {at}); refine the grid")]
    SelfTest { max_rel: f64, at: f64 },

    #[error("collapsed to trivial state; adjust initial amplitude")]
    Collapsed,

    #[error("iteration cap {iterations} reached with residual {residual:e}")]
    IterationCap { iterations: usize, residual: f64 },

    #[error("no eps in [{eps_min}, {eps_max}] passes the de-penalization test")]
    NoPassingEps {
        eps_min: f64,
        eps_max: f64,
        trace: Vec<(f64, f64)>,
    },

    #[error("fit window contains nonpositive values")]
    NonPositive,

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Stable snake-case name of the variant, used in CSV output.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Inadmissible(_) => "inadmissible",
            Error::Classification(_) => "classification",
            Error::OpenProblemBoundary { .. } => "open_problem_boundary",
            Error::BelowThreshold { .. } => "below_threshold",
            Error::Divergent { .. } => "divergent",
            Error::Tolerance { .. } => "tolerance",
            Error::NonFinitePotential(_) => "non_finite_potential",
            Error::Grid(_) => "grid",
            Error::SelfTest { .. } => "self_test",
            Error::Collapsed => "collapsed",
            Error::IterationCap { .. } => "iteration_cap",
            Error::NoPassingEps { .. } => "no_passing_eps",
            Error::NonPositive => "non_positive",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
