use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller supplied inconsistent or insufficient input.
    #[error("invalid input: {0}")]
    Input(String),

    #[error(
        "quadrature did not converge: estimate {estimate:e}, error {error:e} after {intervals} subintervals (tolerance {tolerance:e})"
    )]
    Quadrature {
        estimate: f64,
        error: f64,
        intervals: usize,
        tolerance: f64,
    },

    #[error("full tensor with J^L = {dim}^{neighbors} = {elements} elements exceeds the cap of {cap}")]
    Capacity {
        dim: usize,
        neighbors: usize,
        elements: u128,
        cap: usize,
    },

    #[error("fit did not converge after {iterations} iterations (rms residual {residual:e})")]
    Fit {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    /// Internal bookkeeping inconsistency. Always a bug.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}
