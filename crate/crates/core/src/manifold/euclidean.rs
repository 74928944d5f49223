//! Flat reference backend. Serves as the correctness oracle for the solver
//! machinery: on `R^d` every operation reduces to vector arithmetic.

use super::Coords;

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn exp(x: &[f64], v: &[f64]) -> Coords {
    let mut out = Coords::from_slice(x);
    for (o, d) in out.iter_mut().zip(v) {
        *o += d;
    }
    out
}

pub(crate) fn log(x: &[f64], y: &[f64]) -> Coords {
    let mut out = Coords::from_slice(y);
    for (o, a) in out.iter_mut().zip(x) {
        *o -= a;
    }
    out
}

pub(crate) fn geodesic(x: &[f64], y: &[f64], t: f64) -> Coords {
    let mut out = Coords::from_slice(x);
    for (o, b) in out.iter_mut().zip(y) {
        *o += t * (*b - *o);
    }
    out
}
