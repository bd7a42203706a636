use thiserror::Error;

use crate::graph_solver::NonConvergence;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("curvature field vanishes on the great circle near angle {angle:.6} (value {value:.3e})")]
    VanishingDenominator { angle: f64, value: f64 },

    #[error("discretization error: {0}")]
    Discretization(String),

    #[error("Newton solver stagnated at continuation level {:.3} after {} iterations (residual {:.3e})", .0.lambda, .0.iterations, .0.residual_norm)]
    NonConvergence(Box<NonConvergence>),

    #[error("profile collided with the rotation axis at s = {s:.6} with tangent angle {theta:.6}")]
    AxisCollision { s: f64, theta: f64 },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("not a hemisphere: {0}")]
    NotAHemisphere(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("surface has no boundary")]
    NoBoundary,

    #[error("surface is not closed")]
    NotClosed,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Evaluation(_) => "evaluation",
            Error::VanishingDenominator { .. } => "vanishing_denominator",
            Error::Discretization(_) => "discretization",
            Error::NonConvergence(_) => "non_convergence",
            Error::AxisCollision { .. } => "axis_collision",
            Error::Construction(_) => "construction",
            Error::NotAHemisphere(_) => "not_a_hemisphere",
            Error::Mesh(_) => "mesh",
            Error::NoBoundary => "no_boundary",
            Error::NotClosed => "not_closed",
            Error::InvalidInput(_) => "invalid_input",
            Error::LinearSolver(_) => "linear_solver",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
