//! Error types shared across the crate.

use crate::manifold::Manifold;
use thiserror::Error;

/// Errors raised by geometric operations and domain-type constructors.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("manifold mismatch: expected {expected:?}, got {got:?}")]
    ManifoldMismatch { expected: Manifold, got: Manifold },

    #[error("{what} has {got} coordinates, {manifold:?} expects {want}")]
    DimensionMismatch {
        what: &'static str,
        manifold: Manifold,
        want: usize,
        got: usize,
    },

    #[error("point is not on {manifold:?}: {detail}")]
    OffManifold { manifold: Manifold, detail: String },

    #[error("vector is not tangent at its base point on {manifold:?}: {detail}")]
    NotTangent { manifold: Manifold, detail: String },

    #[error("matrix is not symmetric positive definite (smallest eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("product point is empty")]
    EmptyProduct,

    #[error("product points have different lengths: {0} vs {1}")]
    ProductLengthMismatch(usize, usize),

    #[error("empty point list")]
    EmptyPointList,

    #[error("{0}")]
    InvalidParameter(String),
}

/// Errors raised by the image pipeline (file formats, CLI-facing operations).
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad image file: {0}")]
    BadFile(String),

    #[error("invalid header: {0}")]
    BadHeader(#[from] serde_json::Error),

    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;
