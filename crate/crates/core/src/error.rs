use thiserror::Error;

/// Which coordinate system a domain check was performed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Primal,
    Dual,
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Space::Primal => f.write_str("primal"),
            Space::Dual => f.write_str("dual"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("{space} coordinate {coordinate} = {value} outside open domain ({lower}, {upper})")]
    Domain {
        space: Space,
        coordinate: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("step size must be positive and finite, got {0}")]
    StepSize(f64),

    #[error("coordinate {coordinate}: target {value} is outside the image of the gradient map")]
    OutsideImage { coordinate: usize, value: f64 },

    #[error("root finding did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("metric is ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("step rejected: {0}")]
    StepRejected(String),

    #[error("observation {value} at coordinate {coordinate} is outside the {family} sample space")]
    Observation {
        family: &'static str,
        coordinate: usize,
        value: f64,
    },

    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
