//! Manifold abstraction: points, tangent vectors, and the geometric operations
//! (distance, exp, log, geodesics, point reflection) dispatched over the
//! supported backends.
//!
//! All backends are symmetric Hadamard manifolds (complete, simply connected,
//! nonpositive curvature), so geodesics between any two points are unique,
//! `log` is globally defined, and geodesics extend to arbitrary parameters.
//!
//! Two backends are charts on the 2-dimensional hyperbolic manifold:
//! univariate Gaussian parameters under the Fisher metric and 2x2 symmetric
//! positive definite matrices of determinant 1 under the affine-invariant
//! metric. Both are isometric to the hyperboloid with the metric doubled, so
//! their operations delegate to the hyperbolic kernels and report distances
//! scaled by sqrt(2). Their tangent vectors are stored in the hyperboloid
//! chart at the image of the base point.

use std::fmt;
use std::ops::{Deref, DerefMut};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GeometryError, Result};

pub mod euclidean;
pub mod hyperbolic;
pub mod spd;

/// Largest ambient dimension across backends (3x3 SPD matrices stored full).
pub const MAX_AMBIENT_DIM: usize = 9;

/// Tolerance for on-manifold and tangency validation.
pub const VALIDATION_TOL: f64 = 1e-9;

/// Distances below this are treated as zero in geodesic direction
/// normalization (log returns the zero vector, geodesics stay at the base).
pub const DEGENERATE_DISTANCE: f64 = 1e-12;

/// Symmetry tolerance for SPD matrix validation.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// SPD points with smallest eigenvalue at or below this are rejected.
pub const SPD_MIN_EIGENVALUE: f64 = 1e-12;

/// Determinant tolerance for the det-1 SPD backend.
pub const DET1_TOL: f64 = 1e-9;

/// Fixed-capacity coordinate vector. Every point and tangent vector in this
/// crate fits in [`MAX_AMBIENT_DIM`] coordinates, which keeps per-pixel
/// operations allocation-free.
#[derive(Clone, Copy, PartialEq)]
pub struct Coords {
    len: u8,
    data: [f64; MAX_AMBIENT_DIM],
}

impl Coords {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_AMBIENT_DIM);
        Coords {
            len: len as u8,
            data: [0.0; MAX_AMBIENT_DIM],
        }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        assert!(
            s.len() <= MAX_AMBIENT_DIM,
            "coordinate vector of length {} exceeds the supported maximum {}",
            s.len(),
            MAX_AMBIENT_DIM
        );
        let mut c = Coords::zeros(s.len());
        c.data[..s.len()].copy_from_slice(s);
        c
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.len as usize]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data[..self.len as usize]
    }
}

impl Deref for Coords {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        self.as_slice()
    }
}

impl DerefMut for Coords {
    fn deref_mut(&mut self) -> &mut [f64] {
        self.as_mut_slice()
    }
}

impl fmt::Debug for Coords {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.as_slice().fmt(f)
    }
}

/// Curvature of a backend, as far as the algorithms care about it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Curvature {
    Constant(f64),
    VariableNonpositive,
}

/// A manifold backend together with its dimension parameters. Cheap to copy;
/// every [`Point`] and [`Tangent`] carries one so mismatched operands are
/// caught at the API boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Manifold {
    /// Flat reference backend, `R^dim`.
    Euclidean { dim: usize },
    /// Hyperboloid model of hyperbolic space, embedded in `R^{dim+1}` with
    /// the Minkowski form; curvature -1.
    Hyperbolic { dim: usize },
    /// Symmetric positive definite n x n matrices with the affine-invariant
    /// metric, stored as full row-major matrices.
    Spd { n: usize },
    /// 2x2 SPD matrices of determinant 1 (affine-invariant metric);
    /// isometric to the hyperboloid with doubled metric, curvature -1/2.
    SpdDet1,
    /// Univariate Gaussian parameters (mu, sigma) with the Fisher metric;
    /// isometric to the hyperboloid with doubled metric, curvature -1/2.
    GaussianFisher,
}

impl Manifold {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_AMBIENT_DIM {
            return Err(GeometryError::InvalidParameter(format!(
                "euclidean dimension must be in 1..={MAX_AMBIENT_DIM}, got {dim}"
            )));
        }
        Ok(Manifold::Euclidean { dim })
    }

    pub fn hyperbolic(dim: usize) -> Result<Self> {
        if dim == 0 || dim + 1 > MAX_AMBIENT_DIM {
            return Err(GeometryError::InvalidParameter(format!(
                "hyperbolic dimension must be in 1..={}, got {dim}",
                MAX_AMBIENT_DIM - 1
            )));
        }
        Ok(Manifold::Hyperbolic { dim })
    }

    pub fn spd(n: usize) -> Result<Self> {
        if n == 0 || n > 3 {
            return Err(GeometryError::InvalidParameter(format!(
                "spd matrix size must be in 1..=3, got {n}"
            )));
        }
        Ok(Manifold::Spd { n })
    }

    /// Number of stored coordinates per point.
    pub fn ambient_dim(&self) -> usize {
        match *self {
            Manifold::Euclidean { dim } => dim,
            Manifold::Hyperbolic { dim } => dim + 1,
            Manifold::Spd { n } => n * n,
            Manifold::SpdDet1 => 4,
            Manifold::GaussianFisher => 2,
        }
    }

    /// Number of stored coordinates per tangent vector. Differs from
    /// `ambient_dim` for the hyperboloid-chart backends.
    pub fn tangent_dim(&self) -> usize {
        match *self {
            Manifold::Euclidean { dim } => dim,
            Manifold::Hyperbolic { dim } => dim + 1,
            Manifold::Spd { n } => n * n,
            Manifold::SpdDet1 | Manifold::GaussianFisher => 3,
        }
    }

    /// Dimension of the manifold itself.
    pub fn intrinsic_dim(&self) -> usize {
        match *self {
            Manifold::Euclidean { dim } => dim,
            Manifold::Hyperbolic { dim } => dim,
            Manifold::Spd { n } => n * (n + 1) / 2,
            Manifold::SpdDet1 | Manifold::GaussianFisher => 2,
        }
    }

    pub fn curvature(&self) -> Curvature {
        match *self {
            Manifold::Euclidean { .. } => Curvature::Constant(0.0),
            Manifold::Hyperbolic { .. } => Curvature::Constant(-1.0),
            Manifold::Spd { .. } => Curvature::VariableNonpositive,
            Manifold::SpdDet1 | Manifold::GaussianFisher => Curvature::Constant(-0.5),
        }
    }

    /// Canonical base point: the origin, the hyperboloid apex, the identity
    /// matrix, or the standard normal parameters.
    pub fn origin(&self) -> Point {
        let mut c = Coords::zeros(self.ambient_dim());
        match *self {
            Manifold::Euclidean { .. } => {}
            Manifold::Hyperbolic { dim } => c[dim] = 1.0,
            Manifold::Spd { n } => {
                for i in 0..n {
                    c[i * n + i] = 1.0;
                }
            }
            Manifold::SpdDet1 => {
                c[0] = 1.0;
                c[3] = 1.0;
            }
            Manifold::GaussianFisher => {
                c[1] = 1.0;
            }
        }
        Point {
            manifold: *self,
            coords: c,
        }
    }

    /// Parse the backend identifier used in file headers and on the CLI.
    pub fn from_kind_str(kind: &str, dim: Option<usize>) -> Result<Self> {
        match kind {
            "euclidean" => Manifold::euclidean(dim.unwrap_or(1)),
            "hyperbolic" => Manifold::hyperbolic(dim.unwrap_or(2)),
            "spd" => Manifold::spd(dim.unwrap_or(3)),
            "spd-det1" => Ok(Manifold::SpdDet1),
            "gaussian-fisher" => Ok(Manifold::GaussianFisher),
            other => Err(GeometryError::InvalidParameter(format!(
                "unknown manifold kind {other:?}"
            ))),
        }
    }

    pub fn kind_str(&self) -> &'static str {
        match *self {
            Manifold::Euclidean { .. } => "euclidean",
            Manifold::Hyperbolic { .. } => "hyperbolic",
            Manifold::Spd { .. } => "spd",
            Manifold::SpdDet1 => "spd-det1",
            Manifold::GaussianFisher => "gaussian-fisher",
        }
    }

    /// Dimension parameter reported alongside `kind_str` (matrix size for
    /// SPD backends, intrinsic dimension otherwise).
    pub fn dim_param(&self) -> Option<usize> {
        match *self {
            Manifold::Euclidean { dim } | Manifold::Hyperbolic { dim } => Some(dim),
            Manifold::Spd { n } => Some(n),
            Manifold::SpdDet1 | Manifold::GaussianFisher => None,
        }
    }

    // ------------------------------------------------------------------
    // Validation
    // ------------------------------------------------------------------

    /// Check the on-manifold predicate for a coordinate vector.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(GeometryError::DimensionMismatch {
                what: "point",
                manifold: *self,
                want: self.ambient_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::OffManifold {
                manifold: *self,
                detail: "non-finite coordinate".into(),
            });
        }
        match *self {
            Manifold::Euclidean { .. } => Ok(()),
            Manifold::Hyperbolic { .. } => {
                let q = hyperbolic::minkowski_inner(x, x);
                if (q + 1.0).abs() > VALIDATION_TOL {
                    return Err(GeometryError::OffManifold {
                        manifold: *self,
                        detail: format!("<x,x>_M = {q}, expected -1"),
                    });
                }
                if x[x.len() - 1] <= 0.0 {
                    return Err(GeometryError::OffManifold {
                        manifold: *self,
                        detail: "last coordinate must be positive".into(),
                    });
                }
                Ok(())
            }
            Manifold::Spd { n } => spd::check_point(x, n).map_err(|e| self.wrap_spd_err(e)),
            Manifold::SpdDet1 => {
                spd::check_point(x, 2).map_err(|e| self.wrap_spd_err(e))?;
                let det = x[0] * x[3] - x[1] * x[2];
                if (det - 1.0).abs() > DET1_TOL {
                    return Err(GeometryError::OffManifold {
                        manifold: *self,
                        detail: format!("determinant {det}, expected 1"),
                    });
                }
                Ok(())
            }
            Manifold::GaussianFisher => {
                if x[1] <= 0.0 {
                    return Err(GeometryError::OffManifold {
                        manifold: *self,
                        detail: format!("sigma = {}, must be positive", x[1]),
                    });
                }
                Ok(())
            }
        }
    }

    fn wrap_spd_err(&self, e: spd::SpdCheckError) -> GeometryError {
        match e {
            spd::SpdCheckError::NotSymmetric(d) => GeometryError::OffManifold {
                manifold: *self,
                detail: format!("asymmetry {d:e} exceeds {SYMMETRY_TOL:e}"),
            },
            spd::SpdCheckError::NotPositiveDefinite(min_eig) => {
                GeometryError::NotPositiveDefinite { min_eig }
            }
        }
    }

    /// Check the tangency predicate for a vector at a base point (assumed on
    /// the manifold).
    pub fn check_tangent(&self, base: &[f64], v: &[f64]) -> Result<()> {
        if v.len() != self.tangent_dim() {
            return Err(GeometryError::DimensionMismatch {
                what: "tangent vector",
                manifold: *self,
                want: self.tangent_dim(),
                got: v.len(),
            });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NotTangent {
                manifold: *self,
                detail: "non-finite coordinate".into(),
            });
        }
        match *self {
            Manifold::Euclidean { .. } => Ok(()),
            Manifold::Hyperbolic { .. } => check_minkowski_tangent(*self, base, v),
            Manifold::Spd { n } => {
                let asym = spd::max_asymmetry(v, n);
                if asym > SYMMETRY_TOL {
                    return Err(GeometryError::NotTangent {
                        manifold: *self,
                        detail: format!("asymmetry {asym:e} exceeds {SYMMETRY_TOL:e}"),
                    });
                }
                Ok(())
            }
            Manifold::SpdDet1 => {
                let h = hyperbolic::spd1_matrix_to_minkowski(base);
                check_minkowski_tangent(*self, &h, v)
            }
            Manifold::GaussianFisher => {
                let h = hyperbolic::gaussian_coords_to_minkowski(base);
                check_minkowski_tangent(*self, &h, v)
            }
        }
    }

    // ------------------------------------------------------------------
    // Raw operations on coordinate slices
    // ------------------------------------------------------------------
    //
    // These skip the on-manifold checks and are the paths used inside
    // solver loops. Callers guarantee that inputs satisfy the backend
    // predicates (the checked `Point`/`Tangent` API does this at
    // construction time).

    /// Geodesic distance.
    pub fn distance_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Manifold::Euclidean { .. } => euclidean::distance(x, y),
            Manifold::Hyperbolic { .. } => hyperbolic::distance(x, y),
            Manifold::Spd { n } => spd::distance(x, y, n),
            Manifold::SpdDet1 => {
                let a = hyperbolic::spd1_matrix_to_minkowski(x);
                let b = hyperbolic::spd1_matrix_to_minkowski(y);
                std::f64::consts::SQRT_2 * hyperbolic::distance(&a, &b)
            }
            Manifold::GaussianFisher => {
                let a = hyperbolic::gaussian_coords_to_minkowski(x);
                let b = hyperbolic::gaussian_coords_to_minkowski(y);
                std::f64::consts::SQRT_2 * hyperbolic::distance(&a, &b)
            }
        }
    }

    /// Exponential map at `x` applied to tangent coordinates `v`.
    pub fn exp_raw(&self, x: &[f64], v: &[f64]) -> Coords {
        match *self {
            Manifold::Euclidean { .. } => euclidean::exp(x, v),
            Manifold::Hyperbolic { .. } => hyperbolic::exp(x, v),
            Manifold::Spd { n } => spd::exp(x, v, n),
            Manifold::SpdDet1 => {
                let h = hyperbolic::spd1_matrix_to_minkowski(x);
                let r = hyperbolic::exp(&h, v);
                hyperbolic::minkowski_to_spd1_matrix(&r)
            }
            Manifold::GaussianFisher => {
                let h = hyperbolic::gaussian_coords_to_minkowski(x);
                let r = hyperbolic::exp(&h, v);
                hyperbolic::minkowski_to_gaussian_coords(&r)
            }
        }
    }

    /// Inverse of the exponential map; returns tangent coordinates at `x`.
    pub fn log_raw(&self, x: &[f64], y: &[f64]) -> Coords {
        match *self {
            Manifold::Euclidean { .. } => euclidean::log(x, y),
            Manifold::Hyperbolic { .. } => hyperbolic::log(x, y),
            Manifold::Spd { n } => spd::log(x, y, n),
            Manifold::SpdDet1 => {
                let a = hyperbolic::spd1_matrix_to_minkowski(x);
                let b = hyperbolic::spd1_matrix_to_minkowski(y);
                hyperbolic::log(&a, &b)
            }
            Manifold::GaussianFisher => {
                let a = hyperbolic::gaussian_coords_to_minkowski(x);
                let b = hyperbolic::gaussian_coords_to_minkowski(y);
                hyperbolic::log(&a, &b)
            }
        }
    }

    /// Point on the geodesic from `x` (t = 0) to `y` (t = 1).
    ///
    /// `t` may lie outside [0, 1]: geodesics on Hadamard manifolds extend
    /// indefinitely, and the reflection formulas evaluate them at parameters
    /// up to 2. For `t` exactly 0 or 1 the endpoint is returned unchanged;
    /// when `d(x, y) < DEGENERATE_DISTANCE` the base `x` is returned for
    /// every `t`.
    pub fn geodesic_raw(&self, x: &[f64], y: &[f64], t: f64) -> Coords {
        if t == 0.0 {
            return Coords::from_slice(x);
        }
        if t == 1.0 {
            return Coords::from_slice(y);
        }
        if self.distance_raw(x, y) < DEGENERATE_DISTANCE {
            return Coords::from_slice(x);
        }
        match *self {
            Manifold::Euclidean { .. } => euclidean::geodesic(x, y, t),
            Manifold::Hyperbolic { .. } => hyperbolic::geodesic(x, y, t),
            Manifold::Spd { n } => spd::geodesic(x, y, t, n),
            Manifold::SpdDet1 => {
                let a = hyperbolic::spd1_matrix_to_minkowski(x);
                let b = hyperbolic::spd1_matrix_to_minkowski(y);
                hyperbolic::minkowski_to_spd1_matrix(&hyperbolic::geodesic(&a, &b, t))
            }
            Manifold::GaussianFisher => {
                let a = hyperbolic::gaussian_coords_to_minkowski(x);
                let b = hyperbolic::gaussian_coords_to_minkowski(y);
                hyperbolic::minkowski_to_gaussian_coords(&hyperbolic::geodesic(&a, &b, t))
            }
        }
    }

    /// Geodesic point reflection of `x` at the mirror point `p`,
    /// `R_p(x) = exp_p(-log_p(x))`.
    pub fn reflect_raw(&self, p: &[f64], x: &[f64]) -> Coords {
        if self.distance_raw(p, x) < DEGENERATE_DISTANCE {
            return Coords::from_slice(x);
        }
        let mut v = self.log_raw(p, x);
        for c in v.iter_mut() {
            *c = -*c;
        }
        self.exp_raw(p, &v)
    }

    /// Norm of tangent coordinates `v` at base `x` in the backend metric.
    pub fn norm_raw(&self, x: &[f64], v: &[f64]) -> f64 {
        match *self {
            Manifold::Euclidean { .. } => euclidean::norm(v),
            Manifold::Hyperbolic { .. } => hyperbolic::tangent_norm(v),
            Manifold::Spd { n } => spd::tangent_norm(x, v, n),
            // Metric on the hyperboloid chart is doubled.
            Manifold::SpdDet1 | Manifold::GaussianFisher => {
                std::f64::consts::SQRT_2 * hyperbolic::tangent_norm(v)
            }
        }
    }

    /// Orthonormal basis (in the backend metric) of the tangent space at
    /// `x`; returns `intrinsic_dim` vectors in tangent coordinates.
    pub fn orthonormal_basis_raw(&self, x: &[f64]) -> Vec<Coords> {
        match *self {
            Manifold::Euclidean { dim } => (0..dim)
                .map(|i| {
                    let mut e = Coords::zeros(dim);
                    e[i] = 1.0;
                    e
                })
                .collect(),
            Manifold::Hyperbolic { .. } => hyperbolic::tangent_basis(x),
            Manifold::Spd { n } => spd::tangent_basis(x, n),
            Manifold::SpdDet1 | Manifold::GaussianFisher => {
                let h = match *self {
                    Manifold::SpdDet1 => hyperbolic::spd1_matrix_to_minkowski(x),
                    _ => hyperbolic::gaussian_coords_to_minkowski(x),
                };
                // the backend metric doubles the Minkowski form, so the
                // orthonormal vectors are the Minkowski ones over sqrt(2)
                hyperbolic::tangent_basis(&h)
                    .into_iter()
                    .map(|mut b| {
                        for c in b.iter_mut() {
                            *c *= std::f64::consts::FRAC_1_SQRT_2;
                        }
                        b
                    })
                    .collect()
            }
        }
    }

    /// Sample tangent coordinates at `x` with independent N(0, std^2)
    /// components in an orthonormal basis of the backend metric.
    pub fn random_tangent_raw<R: Rng + ?Sized>(&self, x: &[f64], std: f64, rng: &mut R) -> Coords {
        let mut v = Coords::zeros(self.tangent_dim());
        for b in self.orthonormal_basis_raw(x) {
            let g: f64 = rng.sample(StandardNormal);
            for (vc, bc) in v.iter_mut().zip(b.iter()) {
                *vc += std * g * bc;
            }
        }
        v
    }

    // ------------------------------------------------------------------
    // Checked operations on points and tangents
    // ------------------------------------------------------------------

    fn expect_point<'a>(&self, p: &'a Point) -> Result<&'a [f64]> {
        if p.manifold != *self {
            return Err(GeometryError::ManifoldMismatch {
                expected: *self,
                got: p.manifold,
            });
        }
        Ok(p.coords.as_slice())
    }

    /// Geodesic distance between two points.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        let (a, b) = (self.expect_point(x)?, self.expect_point(y)?);
        Ok(self.distance_raw(a, b))
    }

    /// Exponential map at the tangent vector's base point.
    pub fn exp(&self, v: &Tangent) -> Result<Point> {
        if v.manifold != *self {
            return Err(GeometryError::ManifoldMismatch {
                expected: *self,
                got: v.manifold,
            });
        }
        Ok(Point {
            manifold: *self,
            coords: self.exp_raw(&v.base, &v.coords),
        })
    }

    /// Tangent vector at `x` pointing to `y` with length `d(x, y)`.
    pub fn log(&self, x: &Point, y: &Point) -> Result<Tangent> {
        let (a, b) = (self.expect_point(x)?, self.expect_point(y)?);
        Ok(Tangent {
            manifold: *self,
            base: x.coords,
            coords: self.log_raw(a, b),
        })
    }

    /// Point on the (extended) geodesic from `x` to `y`; see
    /// [`Manifold::geodesic_raw`] for the parameter conventions.
    pub fn geodesic(&self, x: &Point, y: &Point, t: f64) -> Result<Point> {
        let (a, b) = (self.expect_point(x)?, self.expect_point(y)?);
        Ok(Point {
            manifold: *self,
            coords: self.geodesic_raw(a, b, t),
        })
    }

    /// Geodesic point reflection `R_p(x)`.
    pub fn reflect(&self, p: &Point, x: &Point) -> Result<Point> {
        let (pc, xc) = (self.expect_point(p)?, self.expect_point(x)?);
        Ok(Point {
            manifold: *self,
            coords: self.reflect_raw(pc, xc),
        })
    }

    /// Norm of a tangent vector in the backend metric.
    pub fn norm(&self, v: &Tangent) -> Result<f64> {
        if v.manifold != *self {
            return Err(GeometryError::ManifoldMismatch {
                expected: *self,
                got: v.manifold,
            });
        }
        Ok(self.norm_raw(&v.base, &v.coords))
    }

    /// Random tangent vector at `x`; see [`Manifold::random_tangent_raw`].
    pub fn random_tangent<R: Rng + ?Sized>(
        &self,
        x: &Point,
        std: f64,
        rng: &mut R,
    ) -> Result<Tangent> {
        let base = self.expect_point(x)?;
        Ok(Tangent {
            manifold: *self,
            base: x.coords,
            coords: self.random_tangent_raw(base, std, rng),
        })
    }
}

fn check_minkowski_tangent(m: Manifold, base: &[f64], v: &[f64]) -> Result<()> {
    let ip = hyperbolic::minkowski_inner(base, v);
    let scale = 1.0 + euclidean::norm(base) * euclidean::norm(v);
    if ip.abs() > VALIDATION_TOL * scale {
        return Err(GeometryError::NotTangent {
            manifold: m,
            detail: format!("<x,v>_M = {ip:e}"),
        });
    }
    Ok(())
}

/// A point on a manifold. Construction validates the backend's on-manifold
/// predicate, so operations can assume valid coordinates.
#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    manifold: Manifold,
    coords: Coords,
}

impl Point {
    pub fn new(manifold: Manifold, coords: &[f64]) -> Result<Self> {
        manifold.check_point(coords)?;
        Ok(Point {
            manifold,
            coords: Coords::from_slice(coords),
        })
    }

    /// Construct without the on-manifold check. The coordinate count is
    /// still enforced.
    pub fn new_unchecked(manifold: Manifold, coords: &[f64]) -> Self {
        assert_eq!(coords.len(), manifold.ambient_dim());
        Point {
            manifold,
            coords: Coords::from_slice(coords),
        }
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn coords(&self) -> &[f64] {
        self.coords.as_slice()
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point({:?}, {:?})", self.manifold, self.coords)
    }
}

/// A tangent vector together with its base point.
#[derive(Clone, Copy, PartialEq)]
pub struct Tangent {
    manifold: Manifold,
    base: Coords,
    coords: Coords,
}

impl Tangent {
    pub fn new(base: &Point, coords: &[f64]) -> Result<Self> {
        base.manifold.check_tangent(base.coords(), coords)?;
        Ok(Tangent {
            manifold: base.manifold,
            base: base.coords,
            coords: Coords::from_slice(coords),
        })
    }

    pub fn zero(base: &Point) -> Self {
        Tangent {
            manifold: base.manifold,
            base: base.coords,
            coords: Coords::zeros(base.manifold.tangent_dim()),
        }
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn base(&self) -> Point {
        Point {
            manifold: self.manifold,
            coords: self.base,
        }
    }

    pub fn coords(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut t = *self;
        for c in t.coords.iter_mut() {
            *c *= s;
        }
        t
    }
}

impl fmt::Debug for Tangent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tangent({:?}, {:?} at {:?})", self.manifold, self.coords, self.base)
    }
}

/// An ordered tuple of points on one manifold, with the product metric
/// `d(x, y) = (sum_k d(x_k, y_k)^2)^(1/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductPoint {
    components: Vec<Point>,
}

impl ProductPoint {
    pub fn new(components: Vec<Point>) -> Result<Self> {
        let first = components.first().ok_or(GeometryError::EmptyProduct)?;
        let m = first.manifold;
        for p in &components {
            if p.manifold != m {
                return Err(GeometryError::ManifoldMismatch {
                    expected: m,
                    got: p.manifold,
                });
            }
        }
        Ok(ProductPoint { components })
    }

    pub fn manifold(&self) -> Manifold {
        self.components[0].manifold
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }

    pub fn components(&self) -> &[Point] {
        &self.components
    }
}

impl std::ops::Index<usize> for ProductPoint {
    type Output = Point;
    fn index(&self, i: usize) -> &Point {
        &self.components[i]
    }
}

/// Product-metric distance between two product points of equal length.
pub fn product_distance(x: &ProductPoint, y: &ProductPoint) -> Result<f64> {
    if x.len() != y.len() {
        return Err(GeometryError::ProductLengthMismatch(x.len(), y.len()));
    }
    let m = x.manifold();
    let mut sum = 0.0;
    for (a, b) in x.components().iter().zip(y.components()) {
        let d = m.distance(a, b)?;
        sum += d * d;
    }
    Ok(sum.sqrt())
}
