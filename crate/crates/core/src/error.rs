use thiserror::Error;

/// Errors raised while building algebras, complexes and spectra.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("size limit exceeded: {what} = {size} > cap {cap}")]
    SizeLimit { what: String, size: usize, cap: usize },

    #[error("basis elements {i} and {j} do not close under the bracket (residual {residual:.3e} > {tolerance:.3e})")]
    NotClosed {
        i: usize,
        j: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("algebra is not solvable: derived series dimensions {dims:?} stall above zero")]
    NotSolvable { dims: Vec<usize> },

    #[error("functional is not a character: |f(L^2)| residual {residual:.3e} > {tolerance:.3e}")]
    NotACharacter { residual: f64, tolerance: f64 },

    #[error("simultaneous triangularization failed: strict lower residual {residual:.3e}")]
    Triangularization { residual: f64 },

    #[error("tolerance inconsistency: {0}")]
    ToleranceInconsistency(String),

    #[error("joint spectrum is empty after testing {candidates} candidates")]
    EmptySpectrum { candidates: usize },

    #[error("internal error: d_{degree} * d_{next} = {residual:.3e} exceeds bound {bound:.3e}", next = degree + 1)]
    BoundaryNotNilpotent { degree: usize, residual: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
