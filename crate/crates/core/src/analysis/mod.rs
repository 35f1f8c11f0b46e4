//! Threshold fits, signature plots and the estimators built on them.

pub mod signature;
mod simplex;
pub mod threshold;

use thiserror::Error;

pub use signature::{
    build_signature, lambda_star, power_law_fit, synthesize_specialized, LambdaStar, SignatureMode,
    SignaturePlot, SignaturePoint,
};
pub use threshold::{fit_threshold, CurvePoint, ThresholdFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("threshold fit needs at least 3 lattice sizes, got {found}")]
    TooFewSizes { found: usize },
    #[error("threshold fit needs at least 4 p values per size; L = {size} has {found}")]
    TooFewPoints { size: usize, found: usize },
    #[error("threshold fit did not converge within {iterations} iterations")]
    FitFailure { iterations: usize },
    #[error("fit ran off to p_th = {p_th}, mu = {mu}; the curves have no usable crossing")]
    Unphysical { p_th: f64, mu: f64 },
    #[error("invalid input: {0}")]
    InvalidRow(String),
    #[error("need at least {needed} points, got {found}")]
    InsufficientPoints { needed: usize, found: usize },
    #[error("power-law fit needs strictly positive values")]
    NonPositive,
    #[error("λ = {0} appears more than once")]
    DuplicateLambda(u32),
}
