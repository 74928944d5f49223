//! Hyperboloid model of hyperbolic space `H^d`, embedded in `R^{d+1}` with
//! the Minkowski form `<x,y> = x_1 y_1 + ... + x_d y_d - x_{d+1} y_{d+1}`,
//! restricted to the upper sheet `<x,x> = -1`, `x_{d+1} > 0`. Curvature -1.
//!
//! Also provides the isometries to the equivalent models used by the image
//! pipeline: the Poincare ball, the Poincare half-space, univariate Gaussian
//! parameters with the Fisher metric, and 2x2 SPD matrices of determinant 1.
//! The Gaussian and det-1 SPD spaces carry twice the hyperboloid metric, so
//! distances there are sqrt(2) times the hyperboloid distance of the images.

use super::{Coords, Manifold, Point, DEGENERATE_DISTANCE, DET1_TOL};
use crate::error::{GeometryError, Result};

/// Minkowski bilinear form (signature + ... + -) shared by points and
/// tangent vectors.
pub fn minkowski_inner(x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() - 1;
    let mut s = -x[d] * y[d];
    for i in 0..d {
        s += x[i] * y[i];
    }
    s
}

/// Geodesic distance `arcosh(-<x,y>)`, evaluated as
/// `2 arsinh(|x - y|_M / 2)`: on the hyperboloid
/// `<x-y, x-y>_M = 2(-<x,y> - 1) = 4 sinh^2(d/2)`, and the difference form
/// avoids the catastrophic cancellation of `arcosh` near 1. Rounding that
/// would push the arcosh argument below 1 maps to clamping the squared
/// difference at 0 here.
pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() - 1;
    let mut q = -(x[d] - y[d]) * (x[d] - y[d]);
    for i in 0..d {
        q += (x[i] - y[i]) * (x[i] - y[i]);
    }
    2.0 * (0.5 * q.max(0.0).sqrt()).asinh()
}

pub(crate) fn tangent_norm(v: &[f64]) -> f64 {
    // Tangent vectors are spacelike; clamp tiny negative rounding.
    minkowski_inner(v, v).max(0.0).sqrt()
}

pub(crate) fn exp(x: &[f64], v: &[f64]) -> Coords {
    let n = tangent_norm(v);
    if n < DEGENERATE_DISTANCE {
        return Coords::from_slice(x);
    }
    let (ch, sh) = (n.cosh(), n.sinh());
    let mut out = Coords::zeros(x.len());
    for i in 0..x.len() {
        out[i] = ch * x[i] + sh / n * v[i];
    }
    // Pull the result back onto the sheet; rounding drift accumulates over
    // long solver runs otherwise.
    let q = -minkowski_inner(&out, &out);
    if q > 0.0 {
        let s = 1.0 / q.sqrt();
        for c in out.iter_mut() {
            *c *= s;
        }
    }
    out
}

pub(crate) fn log(x: &[f64], y: &[f64]) -> Coords {
    let a = (-minkowski_inner(x, y)).max(1.0);
    let den = a * a - 1.0;
    if den < 1e-18 {
        return Coords::zeros(x.len());
    }
    let c = a.acosh() / den.sqrt();
    let mut out = Coords::zeros(x.len());
    for i in 0..x.len() {
        out[i] = c * (y[i] - a * x[i]);
    }
    out
}

pub(crate) fn geodesic(x: &[f64], y: &[f64], t: f64) -> Coords {
    let mut v = log(x, y);
    for c in v.iter_mut() {
        *c *= t;
    }
    exp(x, &v)
}

/// Minkowski-orthonormal basis of the tangent space at `x`, built by
/// projecting the canonical basis and orthonormalizing. Returns exactly
/// `d` vectors.
pub(crate) fn tangent_basis(x: &[f64]) -> Vec<Coords> {
    let n = x.len();
    let d = n - 1;
    let mut basis: Vec<Coords> = Vec::with_capacity(d);
    for i in 0..n {
        if basis.len() == d {
            break;
        }
        // project e_i onto the tangent space: v + <v,x> x  (using <x,x> = -1)
        let mut cand = Coords::zeros(n);
        cand[i] = 1.0;
        let ip = minkowski_inner(&cand, x);
        for j in 0..n {
            cand[j] += ip * x[j];
        }
        for b in &basis {
            let c = minkowski_inner(&cand, b);
            for j in 0..n {
                cand[j] -= c * b[j];
            }
        }
        let q = minkowski_inner(&cand, &cand);
        if q > 1e-12 {
            let s = 1.0 / q.sqrt();
            for c in cand.iter_mut() {
                *c *= s;
            }
            basis.push(cand);
        }
    }
    debug_assert_eq!(basis.len(), d);
    basis
}

// ----------------------------------------------------------------------
// Model isometries
// ----------------------------------------------------------------------

/// Hyperboloid -> Poincare ball: `x -> x~ / (1 + x_{d+1})`.
pub fn minkowski_to_ball(x: &[f64]) -> Vec<f64> {
    let d = x.len() - 1;
    let s = 1.0 / (1.0 + x[d]);
    x[..d].iter().map(|&c| c * s).collect()
}

/// Poincare ball -> hyperboloid: `y -> (2y, 1 + |y|^2) / (1 - |y|^2)`.
pub fn ball_to_minkowski(b: &[f64]) -> Vec<f64> {
    let n2: f64 = b.iter().map(|c| c * c).sum();
    let s = 1.0 / (1.0 - n2);
    let mut out: Vec<f64> = b.iter().map(|&c| 2.0 * c * s).collect();
    out.push((1.0 + n2) * s);
    out
}

/// Poincare ball -> Poincare half-space:
/// `x -> (2 x~, 1 - |x|^2) / (|x~|^2 + (x_d - 1)^2)`.
pub fn ball_to_half_space(b: &[f64]) -> Vec<f64> {
    let d = b.len();
    let tail = b[d - 1];
    let head2: f64 = b[..d - 1].iter().map(|c| c * c).sum();
    let n2 = head2 + tail * tail;
    let s = 1.0 / (head2 + (tail - 1.0) * (tail - 1.0));
    let mut out: Vec<f64> = b[..d - 1].iter().map(|&c| 2.0 * c * s).collect();
    out.push((1.0 - n2) * s);
    out
}

/// Poincare half-space -> Poincare ball:
/// `y -> (2 y~, |y|^2 - 1) / (|y~|^2 + (y_d + 1)^2)`.
pub fn half_space_to_ball(h: &[f64]) -> Vec<f64> {
    let d = h.len();
    let tail = h[d - 1];
    let head2: f64 = h[..d - 1].iter().map(|c| c * c).sum();
    let n2 = head2 + tail * tail;
    let s = 1.0 / (head2 + (tail + 1.0) * (tail + 1.0));
    let mut out: Vec<f64> = h[..d - 1].iter().map(|&c| 2.0 * c * s).collect();
    out.push((n2 - 1.0) * s);
    out
}

/// Univariate Gaussian parameters, `sigma > 0`. Under the Fisher metric the
/// parameter space has constant curvature -1/2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianParam {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianParam {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
            return Err(GeometryError::InvalidParameter(format!(
                "Gaussian parameters require finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        Ok(GaussianParam { mu, sigma })
    }
}

/// 2x2 symmetric positive definite matrix of determinant 1, stored by its
/// three distinct entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spd1Matrix {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Spd1Matrix {
    pub fn new(a11: f64, a12: f64, a22: f64) -> Result<Self> {
        let det = a11 * a22 - a12 * a12;
        if !det.is_finite() || a11.is_nan() || a11 <= 0.0 || (det - 1.0).abs() > DET1_TOL {
            return Err(GeometryError::InvalidParameter(format!(
                "not a det-1 SPD matrix: a11 = {a11}, det = {det}"
            )));
        }
        Ok(Spd1Matrix { a11, a12, a22 })
    }
}

/// (mu, sigma) coordinates -> hyperboloid `H^2`, via the half-plane chart
/// `(mu / sqrt(2), sigma)` composed with the ball and hyperboloid maps.
pub(crate) fn gaussian_coords_to_minkowski(c: &[f64]) -> [f64; 3] {
    let h = [c[0] / std::f64::consts::SQRT_2, c[1]];
    let b = half_space_to_ball(&h);
    let m = ball_to_minkowski(&b);
    [m[0], m[1], m[2]]
}

pub(crate) fn minkowski_to_gaussian_coords(x: &[f64]) -> Coords {
    let b = minkowski_to_ball(x);
    let h = ball_to_half_space(&b);
    Coords::from_slice(&[h[0] * std::f64::consts::SQRT_2, h[1]])
}

/// Row-major 2x2 det-1 SPD matrix -> hyperboloid `H^2`:
/// `a -> ((a11 - a22)/2, a12, (a11 + a22)/2)`.
pub(crate) fn spd1_matrix_to_minkowski(m: &[f64]) -> [f64; 3] {
    let a12 = 0.5 * (m[1] + m[2]);
    [0.5 * (m[0] - m[3]), a12, 0.5 * (m[0] + m[3])]
}

pub(crate) fn minkowski_to_spd1_matrix(x: &[f64]) -> Coords {
    Coords::from_slice(&[x[2] + x[0], x[1], x[1], x[2] - x[0]])
}

fn hyperbolic_point(coords: &[f64]) -> Point {
    let m = Manifold::Hyperbolic {
        dim: coords.len() - 1,
    };
    Point::new_unchecked(m, coords)
}

fn expect_hyperbolic(x: &Point, dim: usize) -> Result<()> {
    let want = Manifold::Hyperbolic { dim };
    if x.manifold() != want {
        return Err(GeometryError::ManifoldMismatch {
            expected: want,
            got: x.manifold(),
        });
    }
    Ok(())
}

/// Hyperboloid point -> Poincare ball coordinates (Euclidean norm < 1).
pub fn to_poincare_ball(x: &Point) -> Result<Vec<f64>> {
    match x.manifold() {
        Manifold::Hyperbolic { .. } => Ok(minkowski_to_ball(x.coords())),
        got => Err(GeometryError::ManifoldMismatch {
            expected: Manifold::Hyperbolic { dim: 2 },
            got,
        }),
    }
}

/// Poincare ball coordinates -> hyperboloid point.
pub fn from_poincare_ball(b: &[f64]) -> Result<Point> {
    let n2: f64 = b.iter().map(|c| c * c).sum();
    if n2 >= 1.0 {
        return Err(GeometryError::InvalidParameter(format!(
            "ball point must have norm < 1, got |b|^2 = {n2}"
        )));
    }
    let m = Manifold::hyperbolic(b.len())?;
    Point::new(m, &ball_to_minkowski(b))
}

/// Gaussian parameters -> hyperboloid `H^2` point.
pub fn gaussian_to_hyperbolic(g: &GaussianParam) -> Point {
    hyperbolic_point(&gaussian_coords_to_minkowski(&[g.mu, g.sigma]))
}

/// Hyperboloid `H^2` point -> Gaussian parameters.
pub fn hyperbolic_to_gaussian(x: &Point) -> Result<GaussianParam> {
    expect_hyperbolic(x, 2)?;
    let c = minkowski_to_gaussian_coords(x.coords());
    GaussianParam::new(c[0], c[1])
}

/// Det-1 SPD matrix -> hyperboloid `H^2` point.
pub fn spd1_to_hyperbolic(a: &Spd1Matrix) -> Point {
    hyperbolic_point(&spd1_matrix_to_minkowski(&[a.a11, a.a12, a.a12, a.a22]))
}

/// Hyperboloid `H^2` point -> det-1 SPD matrix.
pub fn hyperbolic_to_spd1(x: &Point) -> Result<Spd1Matrix> {
    expect_hyperbolic(x, 2)?;
    let m = minkowski_to_spd1_matrix(x.coords());
    Spd1Matrix::new(m[0], m[1], m[3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn h2() -> Manifold {
        Manifold::hyperbolic(2).unwrap()
    }

    fn point_from_ball(b0: f64, b1: f64) -> Point {
        from_poincare_ball(&[b0, b1]).unwrap()
    }

    #[test]
    fn exp_along_first_axis() {
        let m = h2();
        let x = m.origin();
        let v = crate::manifold::Tangent::new(&x, &[1.0, 0.0, 0.0]).unwrap();
        let y = m.exp(&v).unwrap();
        assert_relative_eq!(y.coords()[0], 1f64.sinh(), epsilon = 1e-12);
        assert_relative_eq!(y.coords()[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(y.coords()[2], 1f64.cosh(), epsilon = 1e-12);
        assert_relative_eq!(m.distance(&x, &y).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn distance_clamps_rounding() {
        // nearly identical points may give -<x,y> slightly below 1
        let x = [0.3, -0.2, (1.0f64 + 0.09 + 0.04).sqrt()];
        assert_eq!(distance(&x, &x).partial_cmp(&0.0), Some(std::cmp::Ordering::Equal));
    }

    #[test]
    fn ball_origin_maps_to_apex() {
        let b = minkowski_to_ball(&[0.0, 0.0, 1.0]);
        assert_eq!(b, vec![0.0, 0.0]);
        let x = ball_to_minkowski(&[0.0, 0.0]);
        assert_eq!(x, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn ball_origin_to_half_space_unit() {
        let h = ball_to_half_space(&[0.0, 0.0]);
        assert_eq!(h, vec![0.0, 1.0]);
        let b = half_space_to_ball(&[0.0, 1.0]);
        assert_eq!(b, vec![0.0, 0.0]);
    }

    #[test]
    fn standard_normal_maps_to_apex() {
        let g = GaussianParam::new(0.0, 1.0).unwrap();
        let x = gaussian_to_hyperbolic(&g);
        assert_relative_eq!(x.coords()[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(x.coords()[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(x.coords()[2], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn identity_spd1_maps_to_apex() {
        let a = Spd1Matrix::new(1.0, 0.0, 1.0).unwrap();
        let x = spd1_to_hyperbolic(&a);
        assert_eq!(x.coords(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn spd1_diag_image_at_unit_distance() {
        // diag(e, 1/e) maps to (sinh 1, 0, cosh 1), one unit from the apex;
        // its affine-invariant distance from the identity is sqrt(2)
        let e = std::f64::consts::E;
        let a = Spd1Matrix::new(e, 0.0, 1.0 / e).unwrap();
        let x = spd1_to_hyperbolic(&a);
        assert_relative_eq!(x.coords()[0], 1f64.sinh(), epsilon = 1e-12);
        assert_relative_eq!(x.coords()[2], 1f64.cosh(), epsilon = 1e-12);
        let m = h2();
        assert_relative_eq!(m.distance(&m.origin(), &x).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fisher_distance_vertical_geodesic() {
        // d_F((0,1), (0,e)) = sqrt(2): vertical half-plane geodesic of
        // length 1, scaled by the sqrt(2) metric factor.
        let m = Manifold::GaussianFisher;
        let a = Point::new(m, &[0.0, 1.0]).unwrap();
        let b = Point::new(m, &[0.0, std::f64::consts::E]).unwrap();
        assert_relative_eq!(
            m.distance(&a, &b).unwrap(),
            std::f64::consts::SQRT_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gaussian_image_of_sigma_e() {
        let g = GaussianParam::new(0.0, std::f64::consts::E).unwrap();
        let x = gaussian_to_hyperbolic(&g);
        assert_relative_eq!(x.coords()[1], 1f64.sinh(), epsilon = 1e-12);
        assert_relative_eq!(x.coords()[2], 1f64.cosh(), epsilon = 1e-12);
    }

    #[test]
    fn sigma_must_be_positive() {
        assert!(GaussianParam::new(0.0, 0.0).is_err());
        assert!(GaussianParam::new(0.0, -1.0).is_err());
    }

    #[test]
    fn spd1_det_checked() {
        assert!(Spd1Matrix::new(2.0, 0.0, 1.0).is_err());
        assert!(Spd1Matrix::new(-1.0, 0.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn ball_roundtrip(b0 in -0.95f64..0.95, b1 in -0.95f64..0.95) {
            prop_assume!(b0 * b0 + b1 * b1 < 0.9);
            let x = point_from_ball(b0, b1);
            let b = to_poincare_ball(&x).unwrap();
            prop_assert!((b[0] - b0).abs() <= 1e-10);
            prop_assert!((b[1] - b1).abs() <= 1e-10);
            prop_assert!(b.iter().map(|c| c * c).sum::<f64>() < 1.0);
        }

        #[test]
        fn half_space_roundtrip(b0 in -0.9f64..0.9, b1 in -0.9f64..0.9) {
            prop_assume!(b0 * b0 + b1 * b1 < 0.85);
            let h = ball_to_half_space(&[b0, b1]);
            prop_assert!(h[1] > 0.0);
            let b = half_space_to_ball(&h);
            prop_assert!((b[0] - b0).abs() <= 1e-10);
            prop_assert!((b[1] - b1).abs() <= 1e-10);
        }

        #[test]
        fn gaussian_roundtrip(mu in -5.0f64..5.0, sigma in 0.05f64..20.0) {
            let g = GaussianParam::new(mu, sigma).unwrap();
            let x = gaussian_to_hyperbolic(&g);
            let g2 = hyperbolic_to_gaussian(&x).unwrap();
            prop_assert!((g2.mu - mu).abs() <= 1e-10 * (1.0 + mu.abs()));
            prop_assert!((g2.sigma - sigma).abs() <= 1e-10 * (1.0 + sigma));
        }

        #[test]
        fn spd1_roundtrip(p in -2.0f64..2.0, q in -2.0f64..2.0) {
            // det-1 SPD sample: exp of a traceless symmetric matrix
            let n = (p * p + q * q).sqrt();
            let (ch, sh) = (n.cosh(), if n > 0.0 { n.sinh() / n } else { 1.0 });
            let a = Spd1Matrix::new(ch + sh * p, sh * q, ch - sh * p).unwrap();
            let x = spd1_to_hyperbolic(&a);
            let a2 = hyperbolic_to_spd1(&x).unwrap();
            prop_assert!((a2.a11 - a.a11).abs() <= 1e-10 * (1.0 + a.a11.abs()));
            prop_assert!((a2.a12 - a.a12).abs() <= 1e-10 * (1.0 + a.a12.abs()));
            prop_assert!((a2.a22 - a.a22).abs() <= 1e-10 * (1.0 + a.a22.abs()));
        }

        #[test]
        fn ball_metric_matches_hyperboloid(
            a0 in -0.8f64..0.8, a1 in -0.8f64..0.8,
            b0 in -0.8f64..0.8, b1 in -0.8f64..0.8,
        ) {
            prop_assume!(a0 * a0 + a1 * a1 < 0.8 && b0 * b0 + b1 * b1 < 0.8);
            let x = point_from_ball(a0, a1);
            let y = point_from_ball(b0, b1);
            // closed-form Poincare ball distance as an independent check
            let dx2 = (a0 - b0) * (a0 - b0) + (a1 - b1) * (a1 - b1);
            let na = 1.0 - (a0 * a0 + a1 * a1);
            let nb = 1.0 - (b0 * b0 + b1 * b1);
            let d_ball = (1.0 + 2.0 * dx2 / (na * nb)).acosh();
            let d_hyp = h2().distance(&x, &y).unwrap();
            prop_assert!((d_ball - d_hyp).abs() <= 1e-9 * (1.0 + d_ball));
        }
    }
}
