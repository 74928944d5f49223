//! Symmetric positive definite matrices `P(n)` with the affine-invariant
//! metric `<u,v>_x = Trace(x^-1 u x^-1 v)`, for n in {1, 2, 3}.
//!
//! Matrices are stored as full row-major `n x n` slices; every operation
//! symmetrizes its result, so rounding cannot accumulate asymmetry. All
//! matrix functions go through one symmetric eigendecomposition (cyclic
//! Jacobi — n is tiny and fixed, so robustness beats generality here), and
//! `x^{1/2}` / `x^{-1/2}` always come from the same decomposition.

use super::{Coords, SPD_MIN_EIGENVALUE, SYMMETRY_TOL};
use crate::error::{GeometryError, Result};

const MAX_N: usize = 3;
const MAX_LEN: usize = MAX_N * MAX_N;

#[derive(Debug)]
pub(crate) enum SpdCheckError {
    NotSymmetric(f64),
    NotPositiveDefinite(f64),
}

/// Eigendecomposition of a symmetric matrix: `a = V diag(vals) V^T` with the
/// eigenvectors in the columns of `V`.
#[derive(Clone, Copy)]
struct SymEig {
    n: usize,
    vals: [f64; MAX_N],
    vecs: [f64; MAX_LEN],
}

fn sym_eig(a: &[f64], n: usize) -> SymEig {
    debug_assert!((1..=MAX_N).contains(&n) && a.len() == n * n);
    let mut m = [0.0; MAX_LEN];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]);
        }
    }
    let mut v = [0.0; MAX_LEN];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = m[..n * n].iter().map(|c| c * c).sum::<f64>().sqrt();

    for _sweep in 0..40 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= f64::EPSILON * frob {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= f64::EPSILON * frob * 1e-2 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut vals = [0.0; MAX_N];
    for i in 0..n {
        vals[i] = m[i * n + i];
    }
    SymEig { n, vals, vecs: v }
}

impl SymEig {
    /// Reconstruct `V diag(f(vals)) V^T`.
    fn apply(&self, f: impl Fn(f64) -> f64) -> Coords {
        let n = self.n;
        let mut out = Coords::zeros(n * n);
        for k in 0..n {
            let fk = f(self.vals[k]);
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += fk * self.vecs[i * n + k] * self.vecs[j * n + k];
                }
            }
        }
        out
    }

    fn min_val(&self) -> f64 {
        self.vals[..self.n].iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> [f64; MAX_LEN] {
    let mut c = [0.0; MAX_LEN];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

fn symmetrize(m: &mut [f64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = s;
            m[j * n + i] = s;
        }
    }
}

/// `x^{-1/2} y x^{-1/2}`, symmetrized; the "whitened" middle factor every
/// operation works on.
fn whiten(x: &[f64], y: &[f64], n: usize) -> ([f64; MAX_LEN], SymEig) {
    let ex = sym_eig(x, n);
    let inv_sqrt = ex.apply(|l| 1.0 / l.max(f64::MIN_POSITIVE).sqrt());
    let mut m = mat_mul(&mat_mul(&inv_sqrt, y, n), &inv_sqrt, n);
    symmetrize(&mut m, n);
    let sqrt = ex.apply(|l| l.max(0.0).sqrt());
    let mut s = [0.0; MAX_LEN];
    s[..n * n].copy_from_slice(&sqrt[..n * n]);
    (s, sym_eig(&m[..n * n], n))
}

pub(crate) fn max_asymmetry(m: &[f64], n: usize) -> f64 {
    let mut a: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            a = a.max((m[i * n + j] - m[j * n + i]).abs());
        }
    }
    a
}

pub(crate) fn check_point(x: &[f64], n: usize) -> std::result::Result<(), SpdCheckError> {
    let asym = max_asymmetry(x, n);
    if asym > SYMMETRY_TOL {
        return Err(SpdCheckError::NotSymmetric(asym));
    }
    let min_eig = sym_eig(x, n).min_val();
    if min_eig <= SPD_MIN_EIGENVALUE {
        return Err(SpdCheckError::NotPositiveDefinite(min_eig));
    }
    Ok(())
}

/// Matrix exponential of a symmetric matrix (row-major slice).
pub fn sym_expm(s: &[f64], n: usize) -> Result<Vec<f64>> {
    if s.len() != n * n || n == 0 || n > MAX_N {
        return Err(GeometryError::InvalidParameter(format!(
            "expected a {n}x{n} matrix with n in 1..=3, got {} entries",
            s.len()
        )));
    }
    let asym = max_asymmetry(s, n);
    if asym > SYMMETRY_TOL {
        return Err(GeometryError::InvalidParameter(format!(
            "matrix is not symmetric (asymmetry {asym:e})"
        )));
    }
    Ok(sym_eig(s, n).apply(f64::exp).as_slice().to_vec())
}

/// Matrix logarithm of a symmetric positive definite matrix.
pub fn sym_logm(x: &[f64], n: usize) -> Result<Vec<f64>> {
    if x.len() != n * n || n == 0 || n > MAX_N {
        return Err(GeometryError::InvalidParameter(format!(
            "expected a {n}x{n} matrix with n in 1..=3, got {} entries",
            x.len()
        )));
    }
    let asym = max_asymmetry(x, n);
    if asym > SYMMETRY_TOL {
        return Err(GeometryError::InvalidParameter(format!(
            "matrix is not symmetric (asymmetry {asym:e})"
        )));
    }
    let e = sym_eig(x, n);
    let min_eig = e.min_val();
    if min_eig <= SPD_MIN_EIGENVALUE {
        return Err(GeometryError::NotPositiveDefinite { min_eig });
    }
    Ok(e.apply(f64::ln).as_slice().to_vec())
}

/// `|Log(x^{-1/2} y x^{-1/2})|_F`.
pub(crate) fn distance(x: &[f64], y: &[f64], n: usize) -> f64 {
    let (_, em) = whiten(x, y, n);
    em.vals[..n]
        .iter()
        .map(|&l| {
            let t = l.max(f64::MIN_POSITIVE).ln();
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// `x^{1/2} Exp(x^{-1/2} v x^{-1/2}) x^{1/2}`.
pub(crate) fn exp(x: &[f64], v: &[f64], n: usize) -> Coords {
    let (sqrt, es) = whiten(x, v, n);
    let inner = es.apply(f64::exp);
    let mut r = mat_mul(&mat_mul(&sqrt, &inner, n), &sqrt, n);
    symmetrize(&mut r, n);
    Coords::from_slice(&r[..n * n])
}

/// `x^{1/2} Log(x^{-1/2} y x^{-1/2}) x^{1/2}`.
pub(crate) fn log(x: &[f64], y: &[f64], n: usize) -> Coords {
    let (sqrt, em) = whiten(x, y, n);
    let inner = em.apply(|l| l.max(f64::MIN_POSITIVE).ln());
    let mut r = mat_mul(&mat_mul(&sqrt, &inner, n), &sqrt, n);
    symmetrize(&mut r, n);
    Coords::from_slice(&r[..n * n])
}

/// `x^{1/2} (x^{-1/2} y x^{-1/2})^t x^{1/2}`, the geodesic through `x` and
/// `y` at parameter `t` (fractional matrix power of the whitened factor).
pub(crate) fn geodesic(x: &[f64], y: &[f64], t: f64, n: usize) -> Coords {
    let (sqrt, em) = whiten(x, y, n);
    let inner = em.apply(|l| (t * l.max(f64::MIN_POSITIVE).ln()).exp());
    let mut r = mat_mul(&mat_mul(&sqrt, &inner, n), &sqrt, n);
    symmetrize(&mut r, n);
    Coords::from_slice(&r[..n * n])
}

/// `|x^{-1/2} v x^{-1/2}|_F`, the affine-invariant norm of a tangent.
pub(crate) fn tangent_norm(x: &[f64], v: &[f64], n: usize) -> f64 {
    let (_, ev) = whiten(x, v, n);
    // whiten symmetrizes and diagonalizes; the Frobenius norm is the
    // eigenvalue norm of the whitened factor
    ev.vals[..n].iter().map(|l| l * l).sum::<f64>().sqrt()
}

/// Eigenvalues of a symmetric matrix, in the eigensolver's order.
pub fn sym_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n || n == 0 || n > MAX_N {
        return Err(GeometryError::InvalidParameter(format!(
            "expected a {n}x{n} matrix with n in 1..=3, got {} entries",
            a.len()
        )));
    }
    let e = sym_eig(a, n);
    Ok(e.vals[..n].to_vec())
}

/// Orthonormal basis of the tangent space at `x` under `<.,.>_x`: the
/// canonical symmetric basis (diagonal units and off-diagonal pairs over
/// sqrt(2)) conjugated by `x^{1/2}`.
pub(crate) fn tangent_basis(x: &[f64], n: usize) -> Vec<Coords> {
    let sqrt = sym_eig(x, n).apply(|l| l.max(0.0).sqrt());
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut g = [0.0; MAX_LEN];
            if i == j {
                g[i * n + i] = 1.0;
            } else {
                g[i * n + j] = inv_sqrt2;
                g[j * n + i] = inv_sqrt2;
            }
            let mut r = mat_mul(&mat_mul(&sqrt, &g, n), &sqrt, n);
            symmetrize(&mut r, n);
            basis.push(Coords::from_slice(&r[..n * n]));
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Manifold, Point, Tangent};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(m: Manifold, c: &[f64]) -> Point {
        Point::new(m, c).unwrap()
    }

    fn random_spd<R: Rng>(n: usize, spread: f64, rng: &mut R) -> Vec<f64> {
        let m = Manifold::spd(n).unwrap();
        let o = m.origin();
        let v = m.random_tangent_raw(o.coords(), spread, rng);
        m.exp_raw(o.coords(), &v).as_slice().to_vec()
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = sym_expm(&[0.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(e, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn expm_diagonal() {
        let e = sym_expm(&[1.0, 0.0, 0.0, -1.0], 2).unwrap();
        assert_relative_eq!(e[0], std::f64::consts::E, epsilon = 1e-14);
        assert_relative_eq!(e[3], 1.0 / std::f64::consts::E, epsilon = 1e-14);
        assert_relative_eq!(e[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn logm_rejects_non_pd() {
        assert!(sym_logm(&[1.0, 2.0, 2.0, 1.0], 2).is_err());
        assert!(sym_logm(&[0.0, 0.0, 0.0, 0.0], 2).is_err());
    }

    #[test]
    fn distance_identity_to_diag() {
        let m = Manifold::spd(2).unwrap();
        let i = m.origin();
        let e = std::f64::consts::E;
        let y = p(m, &[e, 0.0, 0.0, 1.0 / e]);
        assert_relative_eq!(
            m.distance(&i, &y).unwrap(),
            std::f64::consts::SQRT_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn exp_at_identity_is_expm() {
        let m = Manifold::spd(2).unwrap();
        let i = m.origin();
        let s = [0.3, -0.1, -0.1, 0.7];
        let v = Tangent::new(&i, &s).unwrap();
        let y = m.exp(&v).unwrap();
        let e = sym_expm(&s, 2).unwrap();
        for (a, b) in y.coords().iter().zip(&e) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn affine_invariance_under_congruence() {
        let m3 = Manifold::spd(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = random_spd(3, 1.0, &mut rng);
            let y = random_spd(3, 1.0, &mut rng);
            // random invertible congruence
            let mut a = [0.0f64; 9];
            loop {
                for c in a.iter_mut() {
                    *c = rng.gen_range(-1.0..1.0);
                }
                let det = a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                    + a[2] * (a[3] * a[7] - a[4] * a[6]);
                if det.abs() > 0.3 {
                    break;
                }
            }
            let at = {
                let mut t = [0.0; 9];
                for i in 0..3 {
                    for j in 0..3 {
                        t[i * 3 + j] = a[j * 3 + i];
                    }
                }
                t
            };
            let cong = |z: &[f64]| {
                let mut r = mat_mul(&mat_mul(&at, z, 3), &a, 3);
                symmetrize(&mut r, 3);
                r[..9].to_vec()
            };
            let d0 = m3.distance_raw(&x, &y);
            let d1 = m3.distance_raw(&cong(&x), &cong(&y));
            assert!((d0 - d1).abs() <= 1e-9 * (1.0 + d0), "{d0} vs {d1}");
        }
    }

    #[test]
    fn geodesic_midpoint_commutes_with_inversion() {
        let m = Manifold::spd(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let x = random_spd(2, 1.0, &mut rng);
            let y = random_spd(2, 1.0, &mut rng);
            let inv = |z: &[f64]| sym_eig(z, 2).apply(|l| 1.0 / l).as_slice().to_vec();
            let mid = m.geodesic_raw(&x, &y, 0.5);
            let mid_inv = m.geodesic_raw(&inv(&x), &inv(&y), 0.5);
            let inv_mid = inv(&mid);
            for (a, b) in inv_mid.iter().zip(mid_inv.iter()) {
                assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn roundtrip_with_moderate_condition_numbers() {
        let m = Manifold::spd(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let x = random_spd(3, 1.2, &mut rng);
            let y = random_spd(3, 1.2, &mut rng);
            let v = m.log_raw(&x, &y);
            let y2 = m.exp_raw(&x, &v);
            for (a, b) in y.iter().zip(y2.iter()) {
                assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn cat0_four_point_inequality_p3() {
        let m = Manifold::spd(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..200 {
            let pts: Vec<Vec<f64>> = (0..4).map(|_| random_spd(3, 1.0, &mut rng)).collect();
            let d = |a: usize, b: usize| m.distance_raw(&pts[a], &pts[b]);
            let lhs = d(0, 2).powi(2) + d(1, 3).powi(2);
            let rhs = d(0, 3).powi(2) + d(1, 2).powi(2) + 2.0 * d(0, 1) * d(2, 3);
            assert!(lhs <= rhs + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn expm_logm_roundtrip(
            a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
            d in -2.0f64..2.0, e in -2.0f64..2.0, f in -2.0f64..2.0,
        ) {
            // symmetric with Gershgorin-bounded spectrum in [-6, 6]
            let s = [a, b, c, b, d, e, c, e, f];
            let x = sym_expm(&s, 3).unwrap();
            let s2 = sym_logm(&x, 3).unwrap();
            for (u, v) in s.iter().zip(&s2) {
                prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
            }
        }
    }
}
