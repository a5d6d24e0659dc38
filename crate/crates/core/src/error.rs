//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by data loading, solving, screening, and path driving.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A dataset must contain at least one sample.
    #[error("empty dataset")]
    EmptyDataset,

    /// A caller-supplied argument is out of its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Sample index out of range.
    #[error("sample index {index} out of range (dataset has {n} samples)")]
    IndexOutOfRange { index: usize, n: usize },

    /// A vector argument does not match the dataset length.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// The solver hit its epoch budget before reaching the requested tolerance.
    #[error(
        "solver did not converge within {epochs} epochs (worst KKT violation {violation:.3e})"
    )]
    NoConvergence { epochs: usize, violation: f64 },

    /// All row sums of Q are non-positive, so no smallest useful C exists.
    #[error("degenerate kernel matrix: max_i (Q 1)_i = {0:.3e} is not positive")]
    DegenerateKernel(f64),

    /// A squared ball radius came out more negative than numerical noise allows;
    /// the supplied reference solution violates a necessary optimality condition.
    #[error("negative squared ball radius {0:.3e}: reference solution is inconsistent")]
    NegativeRadius(f64),

    /// The two screening balls do not intersect, which is impossible for
    /// consistent inputs since both must contain the optimum.
    #[error("screening balls are disjoint (center gap exceeds radii by {0:.3e})")]
    DisjointBalls(f64),

    /// The path certificate failed immediately above the current C.
    #[error("path step collapse at C = {c:.6e}: certified relative gap {gap:.3e} exceeds epsilon")]
    StepCollapse { c: f64, gap: f64 },

    /// Context wrapper for failures inside the path loop; `step` is the
    /// 0-based index of the step being built.
    #[error("path step {step} (from C = {c:.6e}): {source}")]
    PathStep { step: usize, c: f64, source: Box<Error> },

    /// Screening verification found a kept/fixed assignment that disagrees
    /// with an exact solve.
    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that signal a numerical inconsistency between the
    /// screening geometry and the data, as opposed to bad usage or bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NegativeRadius(_) | Error::DisjointBalls(_) => true,
            Error::PathStep { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
