use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {t} lies outside the domain [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },

    #[error("derivative of order {order} is not available at {t}")]
    Smoothness { t: f64, order: usize },

    #[error("invalid construction: {0}")]
    Construction(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("mollification radius {eps} is too large for a piece of length {piece}")]
    MollifierTooWide { eps: f64, piece: f64 },

    #[error("gluing condition violated: {0}")]
    Gluing(String),

    #[error("invalid warping function: {0}")]
    InvalidWarping(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("curve reaches the axis: {0}")]
    Axis(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("geometry failure: {0}")]
    Geometry(String),

    /// A constraint in a parameter-selection chain has no admissible value.
    #[error("infeasible: constraint `{constraint}` fails ({detail})")]
    Infeasible { constraint: String, detail: String },
}

impl Error {
    pub fn infeasible(constraint: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Infeasible {
            constraint: constraint.into(),
            detail: detail.into(),
        }
    }
}
