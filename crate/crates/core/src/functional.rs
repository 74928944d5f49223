//! The split objective: a sum of terms, each a set of disjoint pixel
//! singletons (distance-to-anchor penalties) or disjoint pixel pairs
//! (pairwise-distance penalties) with a shared weight.
//!
//! Disjointness within a term is what makes the term's prox and reflection
//! componentwise, which is the whole point of the splitting: every solver in
//! this crate only ever touches a term through the closed-form per-pixel
//! maps in [`crate::prox`].

use crate::error::{GeometryError, Result};
use crate::manifold::{Coords, Manifold};
use crate::prox::{
    prox_pair_raw, prox_to_anchor_raw, reflect_pair_raw, reflect_to_anchor_raw, Power,
};

/// One summand of the split objective.
#[derive(Clone, Debug)]
pub struct SplitTerm {
    pub weight: f64,
    pub kind: TermKind,
}

#[derive(Clone, Debug)]
pub enum TermKind {
    /// `weight * sum_i (1/nu) d(anchor_i, u_{p_i})^nu` over pixel singletons.
    Anchors {
        items: Vec<(usize, Coords)>,
        power: Power,
    },
    /// `weight * sum_i (1/nu) d(u_{p_i}, u_{q_i})^nu` over disjoint pixel
    /// pairs (the same `1/nu` normalization as the anchored penalty, which
    /// is what the closed-form prox parameters belong to; for the
    /// total-variation case `nu = 1` nothing changes).
    Pairs {
        pairs: Vec<(usize, usize)>,
        power: Power,
    },
}

impl SplitTerm {
    pub fn anchors(weight: f64, power: Power, items: Vec<(usize, Coords)>) -> Self {
        SplitTerm {
            weight,
            kind: TermKind::Anchors { items, power },
        }
    }

    pub fn pairs(weight: f64, power: Power, pairs: Vec<(usize, usize)>) -> Self {
        SplitTerm {
            weight,
            kind: TermKind::Pairs { pairs, power },
        }
    }

    /// Number of summands (singletons or pairs) in this term.
    pub fn support_len(&self) -> usize {
        match &self.kind {
            TermKind::Anchors { items, .. } => items.len(),
            TermKind::Pairs { pairs, .. } => pairs.len(),
        }
    }

    /// Pixel indices touched by this term, for disjointness checks.
    fn touched(&self) -> Vec<usize> {
        match &self.kind {
            TermKind::Anchors { items, .. } => items.iter().map(|(p, _)| *p).collect(),
            TermKind::Pairs { pairs, .. } => {
                pairs.iter().flat_map(|&(p, q)| [p, q]).collect()
            }
        }
    }

    fn validate(&self, n_pixels: usize) -> Result<()> {
        if !self.weight.is_finite() || self.weight < 0.0 {
            return Err(GeometryError::InvalidParameter(format!(
                "term weight must be finite and nonnegative, got {}",
                self.weight
            )));
        }
        let touched = self.touched();
        let mut seen = vec![false; n_pixels];
        for p in touched {
            if p >= n_pixels {
                return Err(GeometryError::InvalidParameter(format!(
                    "pixel index {p} out of range for {n_pixels} pixels"
                )));
            }
            if seen[p] {
                return Err(GeometryError::InvalidParameter(format!(
                    "pixel {p} appears twice within one term; componentwise prox requires \
                     disjoint summands"
                )));
            }
            seen[p] = true;
        }
        if let TermKind::Pairs { pairs, .. } = &self.kind {
            if pairs.iter().any(|&(p, q)| p == q) {
                return Err(GeometryError::InvalidParameter(
                    "pair term contains a degenerate (p, p) pair".into(),
                ));
            }
        }
        Ok(())
    }

    /// Value of this term on a flat coordinate buffer.
    pub fn evaluate(&self, m: Manifold, u: &[f64]) -> f64 {
        let amb = m.ambient_dim();
        let px = |p: usize| &u[p * amb..(p + 1) * amb];
        let mut acc = 0.0;
        match &self.kind {
            TermKind::Anchors { items, power } => {
                for (p, a) in items {
                    let d = m.distance_raw(px(*p), a);
                    acc += match power {
                        Power::One => d,
                        Power::Two => 0.5 * d * d,
                    };
                }
            }
            TermKind::Pairs { pairs, power } => {
                for &(p, q) in pairs {
                    let d = m.distance_raw(px(p), px(q));
                    acc += match power {
                        Power::One => d,
                        Power::Two => 0.5 * d * d,
                    };
                }
            }
        }
        self.weight * acc
    }

    /// Apply `prox_{eta * weight * term}` in place; pixels the term does not
    /// touch are fixed points.
    pub fn apply_prox(&self, m: Manifold, eta: f64, u: &mut [f64]) {
        let amb = m.ambient_dim();
        let scale = eta * self.weight;
        if scale == 0.0 {
            return;
        }
        match &self.kind {
            TermKind::Anchors { items, power } => {
                for (p, a) in items {
                    let r = prox_to_anchor_raw(m, a, *power, scale, &u[p * amb..(p + 1) * amb]);
                    u[p * amb..(p + 1) * amb].copy_from_slice(&r);
                }
            }
            TermKind::Pairs { pairs, power } => {
                for &(p, q) in pairs {
                    let (rp, rq) = prox_pair_raw(
                        m,
                        *power,
                        scale,
                        &u[p * amb..(p + 1) * amb],
                        &u[q * amb..(q + 1) * amb],
                    );
                    u[p * amb..(p + 1) * amb].copy_from_slice(&rp);
                    u[q * amb..(q + 1) * amb].copy_from_slice(&rq);
                }
            }
        }
    }

    /// Apply the reflection of `eta * weight * term` in place.
    pub fn apply_reflect(&self, m: Manifold, eta: f64, u: &mut [f64]) {
        let amb = m.ambient_dim();
        let scale = eta * self.weight;
        if scale == 0.0 {
            return;
        }
        match &self.kind {
            TermKind::Anchors { items, power } => {
                for (p, a) in items {
                    let r =
                        reflect_to_anchor_raw(m, a, *power, scale, &u[p * amb..(p + 1) * amb]);
                    u[p * amb..(p + 1) * amb].copy_from_slice(&r);
                }
            }
            TermKind::Pairs { pairs, power } => {
                for &(p, q) in pairs {
                    let (rp, rq) = reflect_pair_raw(
                        m,
                        *power,
                        scale,
                        &u[p * amb..(p + 1) * amb],
                        &u[q * amb..(q + 1) * amb],
                    );
                    u[p * amb..(p + 1) * amb].copy_from_slice(&rp);
                    u[q * amb..(q + 1) * amb].copy_from_slice(&rq);
                }
            }
        }
    }
}

/// The full split objective over a pixel grid (stored row-major, flattened).
#[derive(Clone, Debug)]
pub struct SplitFunctional {
    manifold: Manifold,
    n_pixels: usize,
    terms: Vec<SplitTerm>,
}

impl SplitFunctional {
    pub fn new(manifold: Manifold, n_pixels: usize, terms: Vec<SplitTerm>) -> Result<Self> {
        if n_pixels == 0 {
            return Err(GeometryError::InvalidParameter(
                "functional over an empty grid".into(),
            ));
        }
        if terms.is_empty() {
            return Err(GeometryError::InvalidParameter(
                "functional needs at least one term".into(),
            ));
        }
        for t in &terms {
            t.validate(n_pixels)?;
        }
        Ok(SplitFunctional {
            manifold,
            n_pixels,
            terms,
        })
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn terms(&self) -> &[SplitTerm] {
        &self.terms
    }

    /// Exact value of the objective on a flat coordinate buffer.
    pub fn evaluate(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.n_pixels * self.manifold.ambient_dim());
        self.terms.iter().map(|t| t.evaluate(self.manifold, u)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Manifold;
    use approx::assert_relative_eq;

    #[test]
    fn duplicate_pixel_within_term_rejected() {
        let m = Manifold::euclidean(1).unwrap();
        let t = SplitTerm::pairs(1.0, Power::One, vec![(0, 1), (1, 2)]);
        assert!(SplitFunctional::new(m, 3, vec![t]).is_err());
    }

    #[test]
    fn evaluate_two_pixel_rof() {
        // f = (0, 4), u = (1, 3), alpha = 1: 1/2 (1 + 1) + 2 = 3
        let m = Manifold::euclidean(1).unwrap();
        let data = SplitTerm::anchors(
            1.0,
            Power::Two,
            vec![
                (0, Coords::from_slice(&[0.0])),
                (1, Coords::from_slice(&[4.0])),
            ],
        );
        let tv = SplitTerm::pairs(1.0, Power::One, vec![(0, 1)]);
        let f = SplitFunctional::new(m, 2, vec![data, tv]).unwrap();
        assert_relative_eq!(f.evaluate(&[1.0, 3.0]), 3.0);
    }

    #[test]
    fn zero_weight_term_is_identity() {
        let m = Manifold::euclidean(1).unwrap();
        let t = SplitTerm::pairs(0.0, Power::One, vec![(0, 1)]);
        let mut u = vec![0.0, 4.0];
        t.apply_prox(m, 1.0, &mut u);
        assert_eq!(u, vec![0.0, 4.0]);
        t.apply_reflect(m, 1.0, &mut u);
        assert_eq!(u, vec![0.0, 4.0]);
    }

    #[test]
    fn untouched_pixels_are_fixed() {
        let m = Manifold::euclidean(1).unwrap();
        let t = SplitTerm::anchors(1.0, Power::Two, vec![(1, Coords::from_slice(&[0.0]))]);
        let mut u = vec![5.0, 2.0, 7.0];
        t.apply_prox(m, 1.0, &mut u);
        assert_eq!(u[0], 5.0);
        assert_eq!(u[2], 7.0);
        assert_relative_eq!(u[1], 1.0); // eta/(1+eta) = 1/2 of the way to 0
    }
}
