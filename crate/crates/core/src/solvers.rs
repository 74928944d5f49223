//! Douglas-Rachford splitting on Hadamard manifolds, its parallel
//! product-space version, and the cyclic proximal point baseline.
//!
//! The two-term iteration relaxes the composed reflections along geodesics:
//!
//! ```text
//! s^(r)     = R_{eta phi} R_{eta psi} (t^(r))
//! t^(r+1)   = gamma(t^(r), s^(r); lambda_r)
//! solution  = prox_{eta psi} (t-hat)
//! ```
//!
//! The parallel version minimizes `sum_k phi_k` by lifting to K copies of
//! the image and splitting into the separable sum `Phi` and the indicator
//! of the diagonal set D; the reflection order is `R_{eta Phi}` after
//! `R_{iota_D}`, and the solution is the per-pixel Karcher mean across the
//! K copies of the final iterate.
//!
//! All loops are strictly sequential with fixed pixel and copy order, so
//! results are reproducible bit-for-bit under identical inputs. Per-pixel
//! work within an iteration touches no shared mutable state and could be
//! parallelized without changing results as long as the per-pixel Karcher
//! sums keep their fixed copy order.

use std::io::Write;

use crate::error::{GeometryError, Result};
use crate::functional::{SplitFunctional, SplitTerm};
use crate::image::ManifoldImage;
use crate::manifold::{Manifold, Point, ProductPoint};
use crate::prox::{karcher_mean_raw, KarcherConfig};

/// Relaxation parameter schedule for the Krasnoselski-Mann step. Any
/// constant lambda in (0, 1) satisfies the divergence condition
/// `sum_r lambda_r (1 - lambda_r) = +inf`; for explicit tables the
/// condition is documented, not checked. A table repeats its last entry
/// once exhausted.
#[derive(Clone, Debug)]
pub enum Schedule {
    Constant(f64),
    Table(Vec<f64>),
}

impl Schedule {
    pub fn at(&self, r: usize) -> f64 {
        match self {
            Schedule::Constant(l) => *l,
            Schedule::Table(t) => t.get(r).copied().unwrap_or(*t.last().unwrap()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Schedule::Constant(l) => {
                if !(*l > 0.0 && *l < 1.0) {
                    return Err(GeometryError::InvalidParameter(format!(
                        "constant relaxation must lie in (0, 1), got {l}"
                    )));
                }
            }
            Schedule::Table(t) => {
                if t.is_empty() || t.iter().any(|l| !(*l >= 0.0 && *l <= 1.0)) {
                    return Err(GeometryError::InvalidParameter(
                        "relaxation table must be nonempty with entries in [0, 1]".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Prox scale eta.
    pub eta: f64,
    /// Relaxation schedule lambda_r.
    pub lambda: Schedule,
    /// Stop once the per-iteration movement of the solution candidate
    /// drops below this.
    pub eps: f64,
    pub max_iter: usize,
    pub karcher: KarcherConfig,
    /// Evaluate the functional on every iterate (costs about as much as an
    /// iteration on large images; trace rows carry NaN when disabled).
    pub record_functional: bool,
    /// Reserved for randomized solver variants; the algorithms implemented
    /// here are deterministic and ignore it.
    pub rng_seed: Option<u64>,
}

impl SolverConfig {
    pub fn new(eta: f64) -> Self {
        SolverConfig {
            eta,
            lambda: Schedule::Constant(0.9),
            eps: 1e-6,
            max_iter: 1000,
            karcher: KarcherConfig::default(),
            record_functional: true,
            rng_seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return Err(GeometryError::InvalidParameter(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if self.eps.is_nan() || self.eps <= 0.0 || self.max_iter == 0 {
            return Err(GeometryError::InvalidParameter(
                "need eps > 0 and max_iter >= 1".into(),
            ));
        }
        self.lambda.validate()?;
        self.karcher.validate()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Movement dropped below `eps`.
    Converged,
    /// Iteration budget exhausted; the returned solution is the best
    /// (latest) iterate.
    MaxIterations,
}

#[derive(Clone, Copy, Debug)]
pub struct TraceRow {
    pub iter: usize,
    /// Functional value at the solution candidate; NaN when recording is
    /// disabled.
    pub functional: f64,
    /// Movement of the solution candidate, `d(x^(r), x^(r-1))` in the
    /// product metric.
    pub eps: f64,
}

/// Per-iteration record of a solver run.
#[derive(Clone, Debug)]
pub struct SolverTrace {
    pub rows: Vec<TraceRow>,
    pub termination: Termination,
    pub iterations: usize,
    /// Number of per-pixel Karcher means that hit their iteration cap.
    pub karcher_warnings: usize,
}

impl SolverTrace {
    /// CSV with columns `iter,functional,eps`; values carry 12 significant
    /// digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "iter,functional,eps")?;
        for row in &self.rows {
            writeln!(w, "{},{:.11e},{:.11e}", row.iter, row.functional, row.eps)?;
        }
        Ok(())
    }
}

/// Product-metric distance between two flat coordinate buffers.
fn buffer_distance(m: Manifold, a: &[f64], b: &[f64]) -> f64 {
    let amb = m.ambient_dim();
    let n = a.len() / amb;
    let mut acc = 0.0;
    for p in 0..n {
        let d = m.distance_raw(&a[p * amb..(p + 1) * amb], &b[p * amb..(p + 1) * amb]);
        acc += d * d;
    }
    acc.sqrt()
}

// ----------------------------------------------------------------------
// Parallel Douglas-Rachford
// ----------------------------------------------------------------------

/// Stepping interface of the parallel Douglas-Rachford iteration, exposed
/// so callers can observe the K-fold iterate stack (reference comparisons,
/// fixed-point diagnostics).
pub struct PdraSolver<'a> {
    f: &'a SplitFunctional,
    eta: f64,
    karcher: KarcherConfig,
    stack: Vec<Vec<f64>>,
    scratch: Vec<Vec<f64>>,
    candidate: Vec<f64>,
    prev_candidate: Vec<f64>,
    karcher_warnings: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct StepReport {
    /// Movement of the solution candidate in the product metric.
    pub eps: f64,
}

impl<'a> PdraSolver<'a> {
    /// Start from K copies of `u0` (one per term of the functional).
    pub fn new(f: &'a SplitFunctional, u0: &[f64], cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let m = f.manifold();
        let amb = m.ambient_dim();
        if u0.len() != f.n_pixels() * amb {
            return Err(GeometryError::InvalidParameter(format!(
                "initial buffer has {} entries, functional expects {}",
                u0.len(),
                f.n_pixels() * amb
            )));
        }
        let k = f.terms().len();
        let stack = vec![u0.to_vec(); k];
        let scratch = vec![vec![0.0; u0.len()]; k];
        let mut solver = PdraSolver {
            f,
            eta: cfg.eta,
            karcher: cfg.karcher,
            stack,
            scratch,
            candidate: u0.to_vec(),
            prev_candidate: u0.to_vec(),
            karcher_warnings: 0,
        };
        // the mean of identical copies is the copy itself; recompute anyway
        // so the invariant "candidate = mean of stack" holds from the start
        solver.recompute_candidate();
        Ok(solver)
    }

    /// One iteration: reflect at the diagonal, reflect the split terms,
    /// relax along geodesics, refresh the solution candidate.
    pub fn step(&mut self, lambda: f64) -> StepReport {
        let m = self.f.manifold();
        let amb = m.ambient_dim();
        let n = self.f.n_pixels();

        std::mem::swap(&mut self.prev_candidate, &mut self.candidate);

        // s = R_{iota_D}(t): reflect every copy at the per-pixel mean
        for (copy, refl) in self.stack.iter().zip(self.scratch.iter_mut()) {
            for p in 0..n {
                let mean = &self.prev_candidate[p * amb..(p + 1) * amb];
                let r = m.reflect_raw(mean, &copy[p * amb..(p + 1) * amb]);
                refl[p * amb..(p + 1) * amb].copy_from_slice(&r);
            }
        }
        // s = R_{eta Phi}(s): term k acts on copy k
        for (term, refl) in self.f.terms().iter().zip(self.scratch.iter_mut()) {
            term.apply_reflect(m, self.eta, refl);
        }
        // t = gamma(t, s; lambda)
        for (copy, refl) in self.stack.iter_mut().zip(&self.scratch) {
            for p in 0..n {
                let g = m.geodesic_raw(
                    &copy[p * amb..(p + 1) * amb],
                    &refl[p * amb..(p + 1) * amb],
                    lambda,
                );
                copy[p * amb..(p + 1) * amb].copy_from_slice(&g);
            }
        }
        self.recompute_candidate();
        StepReport {
            eps: buffer_distance(m, &self.candidate, &self.prev_candidate),
        }
    }

    fn recompute_candidate(&mut self) {
        let m = self.f.manifold();
        let amb = m.ambient_dim();
        let n = self.f.n_pixels();
        for p in 0..n {
            let views: Vec<&[f64]> = self
                .stack
                .iter()
                .map(|b| &b[p * amb..(p + 1) * amb])
                .collect();
            let (mean, status) = karcher_mean_raw(m, &views, &self.karcher);
            if !status.converged {
                self.karcher_warnings += 1;
            }
            self.candidate[p * amb..(p + 1) * amb].copy_from_slice(&mean);
        }
    }

    /// Per-pixel Karcher mean of the current stack: the solution candidate.
    pub fn candidate(&self) -> &[f64] {
        &self.candidate
    }

    /// The K-fold iterate stack.
    pub fn stack(&self) -> &[Vec<f64>] {
        &self.stack
    }

    pub fn karcher_warnings(&self) -> usize {
        self.karcher_warnings
    }
}

/// Minimize a split functional by the parallel Douglas-Rachford iteration,
/// starting from K copies of `u0`. Returns the per-pixel Karcher mean of
/// the final iterate stack and the iteration trace.
pub fn pdra_solve(
    f: &SplitFunctional,
    u0: &ManifoldImage,
    cfg: &SolverConfig,
) -> Result<(ManifoldImage, SolverTrace)> {
    check_image(f, u0)?;
    let mut solver = PdraSolver::new(f, u0.data(), cfg)?;
    let mut rows = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut iterations = cfg.max_iter;
    for r in 1..=cfg.max_iter {
        let rep = solver.step(cfg.lambda.at(r - 1));
        let functional = if cfg.record_functional {
            f.evaluate(solver.candidate())
        } else {
            f64::NAN
        };
        rows.push(TraceRow {
            iter: r,
            functional,
            eps: rep.eps,
        });
        if rep.eps < cfg.eps {
            termination = Termination::Converged;
            iterations = r;
            break;
        }
    }
    let solution = ManifoldImage::new(
        f.manifold(),
        u0.rows(),
        u0.cols(),
        solver.candidate().to_vec(),
        None,
    )?;
    Ok((
        solution,
        SolverTrace {
            rows,
            termination,
            iterations,
            karcher_warnings: solver.karcher_warnings(),
        },
    ))
}

// ----------------------------------------------------------------------
// Cyclic proximal point
// ----------------------------------------------------------------------

/// Minimize a split functional with the cyclic proximal point iteration
/// `u <- prox_{eta_r phi_K} o ... o prox_{eta_r phi_1} (u)` and decaying
/// steps `eta_r = eta / (r + 1)`.
pub fn cppa_solve(
    f: &SplitFunctional,
    u0: &ManifoldImage,
    cfg: &SolverConfig,
) -> Result<(ManifoldImage, SolverTrace)> {
    cfg.validate()?;
    check_image(f, u0)?;
    let m = f.manifold();
    let mut u = u0.data().to_vec();
    let mut prev = u.clone();
    let mut rows = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut iterations = cfg.max_iter;
    for r in 1..=cfg.max_iter {
        prev.copy_from_slice(&u);
        let eta_r = cfg.eta / r as f64;
        for term in f.terms() {
            term.apply_prox(m, eta_r, &mut u);
        }
        let eps = buffer_distance(m, &u, &prev);
        let functional = if cfg.record_functional {
            f.evaluate(&u)
        } else {
            f64::NAN
        };
        rows.push(TraceRow {
            iter: r,
            functional,
            eps,
        });
        if eps < cfg.eps {
            termination = Termination::Converged;
            iterations = r;
            break;
        }
    }
    let solution = ManifoldImage::new(m, u0.rows(), u0.cols(), u, None)?;
    Ok((
        solution,
        SolverTrace {
            rows,
            termination,
            iterations,
            karcher_warnings: 0,
        },
    ))
}

// ----------------------------------------------------------------------
// Two-term Douglas-Rachford
// ----------------------------------------------------------------------

/// Minimize `phi + psi` over a product of manifold points by the two-term
/// Douglas-Rachford iteration. Both terms must have componentwise prox
/// available, i.e. touch each component at most once. The solution is
/// `prox_{eta psi}` of the final iterate.
pub fn dr_solve(
    phi: &SplitTerm,
    psi: &SplitTerm,
    t0: &ProductPoint,
    cfg: &SolverConfig,
) -> Result<(ProductPoint, SolverTrace)> {
    cfg.validate()?;
    let m = t0.manifold();
    let n = t0.len();
    // wrap in a functional for validation and evaluation
    let f = SplitFunctional::new(m, n, vec![psi.clone(), phi.clone()])?;
    let amb = m.ambient_dim();
    let mut t = Vec::with_capacity(n * amb);
    for p in t0.components() {
        t.extend_from_slice(p.coords());
    }
    let mut s = vec![0.0; t.len()];
    let mut candidate = t.clone();
    psi.apply_prox(m, cfg.eta, &mut candidate);
    let mut prev = vec![0.0; t.len()];

    let mut rows = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut iterations = cfg.max_iter;
    for r in 1..=cfg.max_iter {
        // s = R_{eta phi} R_{eta psi}(t)
        s.copy_from_slice(&t);
        psi.apply_reflect(m, cfg.eta, &mut s);
        phi.apply_reflect(m, cfg.eta, &mut s);
        // t = gamma(t, s; lambda)
        let lambda = cfg.lambda.at(r - 1);
        for p in 0..n {
            let g = m.geodesic_raw(
                &t[p * amb..(p + 1) * amb],
                &s[p * amb..(p + 1) * amb],
                lambda,
            );
            t[p * amb..(p + 1) * amb].copy_from_slice(&g);
        }
        // solution candidate x^(r) = prox_{eta psi}(t^(r))
        prev.copy_from_slice(&candidate);
        candidate.copy_from_slice(&t);
        psi.apply_prox(m, cfg.eta, &mut candidate);
        let eps = buffer_distance(m, &candidate, &prev);
        let functional = if cfg.record_functional {
            f.evaluate(&candidate)
        } else {
            f64::NAN
        };
        rows.push(TraceRow {
            iter: r,
            functional,
            eps,
        });
        if eps < cfg.eps {
            termination = Termination::Converged;
            iterations = r;
            break;
        }
    }

    let mut comps = Vec::with_capacity(n);
    for p in 0..n {
        comps.push(Point::new_unchecked(m, &candidate[p * amb..(p + 1) * amb]));
    }
    Ok((
        ProductPoint::new(comps)?,
        SolverTrace {
            rows,
            termination,
            iterations,
            karcher_warnings: 0,
        },
    ))
}

/// Exact value of the split objective on an image.
pub fn evaluate_functional(f: &SplitFunctional, u: &ManifoldImage) -> Result<f64> {
    check_image(f, u)?;
    Ok(f.evaluate(u.data()))
}

fn check_image(f: &SplitFunctional, u0: &ManifoldImage) -> Result<()> {
    if u0.manifold() != f.manifold() {
        return Err(GeometryError::ManifoldMismatch {
            expected: f.manifold(),
            got: u0.manifold(),
        });
    }
    if u0.n_pixels() != f.n_pixels() {
        return Err(GeometryError::InvalidParameter(format!(
            "image has {} pixels, functional expects {}",
            u0.n_pixels(),
            f.n_pixels()
        )));
    }
    Ok(())
}
