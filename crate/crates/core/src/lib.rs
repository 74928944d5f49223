//! Restoration (denoising and inpainting) of images whose pixels live on
//! symmetric Hadamard manifolds, by minimizing a quadratic-data + total-
//! variation functional with a parallel Douglas-Rachford splitting, plus a
//! cyclic proximal point baseline.
//!
//! The crate is organized bottom-up:
//!
//! * [`manifold`] — points, tangents, and the geometric operations for the
//!   supported backends (Euclidean, hyperbolic, SPD matrices, det-1 SPD
//!   structure tensors, Gaussian parameters with the Fisher metric);
//! * [`prox`] — closed-form proximal mappings and reflections of the
//!   distance-like functions, Karcher means, and the diagonal projection;
//! * [`functional`] — the split objective (data term plus four pairwise
//!   difference groups) and its evaluation;
//! * [`solvers`] — Douglas-Rachford, its parallel product-space version,
//!   and the cyclic proximal point algorithm;
//! * [`image`] — manifold-valued images and their on-disk format;
//! * [`pipeline`] — model assembly, synthetic data, structure tensors,
//!   Gaussian maximum-likelihood images, noise, and raster export.

pub mod error;
pub mod functional;
pub mod image;
pub mod manifold;
pub mod pipeline;
pub mod prox;
pub mod solvers;

pub use error::{GeometryError, PipelineError};
pub use manifold::{product_distance, Curvature, Manifold, Point, ProductPoint, Tangent};
