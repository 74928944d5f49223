//! Model assembly and data plumbing: builds the split restoration
//! objective from an image, initializes missing pixels, synthesizes test
//! data (phantoms, tangent-space noise, structure tensors, Gaussian
//! maximum-likelihood images), and exports scalar channels as rasters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{GeometryError, PipelineError, Result};
use crate::functional::{SplitFunctional, SplitTerm};
use crate::image::ManifoldImage;
use crate::manifold::{spd, Coords, Manifold};
use crate::prox::Power;
use crate::solvers::{cppa_solve, pdra_solve, SolverConfig, SolverTrace};

/// Which iteration minimizes the objective in [`denoise`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Pdra,
    Cppa,
}

// ----------------------------------------------------------------------
// Objective assembly
// ----------------------------------------------------------------------

/// Split the restoration objective
/// `E(u) = 1/2 sum_V d(f_p, u_p)^2 + alpha TV(u)` into five terms whose
/// proxes are componentwise: the data singletons over the present pixels,
/// and the four first-difference groups (vertical/horizontal, grouped by
/// the parity of the leading index so no pixel repeats within a term).
/// Boundary differences are dropped, matching mirror boundary conditions.
pub fn split_rof(f: &ManifoldImage, alpha: f64) -> Result<SplitFunctional> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(GeometryError::InvalidParameter(format!(
            "alpha must be nonnegative, got {alpha}"
        )));
    }
    let (rows, cols) = (f.rows(), f.cols());
    let idx = |i: usize, j: usize| i * cols + j;

    let mut anchors = Vec::with_capacity(f.n_present());
    for p in 0..f.n_pixels() {
        if f.is_present(p) {
            anchors.push((p, Coords::from_slice(f.pixel(p))));
        }
    }
    let data = SplitTerm::anchors(1.0, Power::Two, anchors);

    let vertical = |start: usize| {
        let mut pairs = Vec::new();
        let mut i = start;
        while i + 1 < rows {
            for j in 0..cols {
                pairs.push((idx(i, j), idx(i + 1, j)));
            }
            i += 2;
        }
        SplitTerm::pairs(alpha, Power::One, pairs)
    };
    let horizontal = |start: usize| {
        let mut pairs = Vec::new();
        let mut j = start;
        while j + 1 < cols {
            for i in 0..rows {
                pairs.push((idx(i, j), idx(i, j + 1)));
            }
            j += 2;
        }
        SplitTerm::pairs(alpha, Power::One, pairs)
    };

    SplitFunctional::new(
        f.manifold(),
        f.n_pixels(),
        vec![data, vertical(0), vertical(1), horizontal(0), horizontal(1)],
    )
}

/// Restore an image: fill missing pixels by nearest-neighbor propagation,
/// build the split objective anchored at the present pixels of `f`, and
/// minimize it with the chosen solver.
pub fn denoise(
    f: &ManifoldImage,
    alpha: f64,
    solver: SolverKind,
    cfg: &SolverConfig,
) -> Result<(ManifoldImage, SolverTrace)> {
    let functional = split_rof(f, alpha)?;
    let u0 = nearest_neighbor_fill(f)?;
    match solver {
        SolverKind::Pdra => pdra_solve(&functional, &u0, cfg),
        SolverKind::Cppa => cppa_solve(&functional, &u0, cfg),
    }
}

/// Fill missing pixels with the value of the nearest known pixel, nearest
/// in breadth-first distance over the 4-neighborhood graph; equidistant
/// sources are resolved toward the smaller linear index. Returns a fully
/// defined image with no mask.
pub fn nearest_neighbor_fill(f: &ManifoldImage) -> Result<ManifoldImage> {
    let n = f.n_pixels();
    if f.mask().is_none() || f.n_present() == n {
        return ManifoldImage::new(
            f.manifold(),
            f.rows(),
            f.cols(),
            f.data().to_vec(),
            None,
        );
    }
    if f.n_present() == 0 {
        return Err(GeometryError::InvalidParameter(
            "cannot initialize an image with no known pixels".into(),
        ));
    }
    let (rows, cols) = (f.rows(), f.cols());
    let mut dist = vec![usize::MAX; n];
    let mut source = vec![usize::MAX; n];
    let mut frontier: Vec<usize> = (0..n).filter(|&p| f.is_present(p)).collect();
    for &p in &frontier {
        dist[p] = 0;
        source[p] = p;
    }
    let mut depth = 0usize;
    while !frontier.is_empty() {
        depth += 1;
        let mut next = Vec::new();
        for &p in &frontier {
            let (i, j) = (p / cols, p % cols);
            let mut visit = |q: usize| {
                if dist[q] > depth {
                    dist[q] = depth;
                    source[q] = source[p];
                    next.push(q);
                } else if dist[q] == depth && source[p] < source[q] {
                    source[q] = source[p];
                }
            };
            if i > 0 {
                visit(p - cols);
            }
            if i + 1 < rows {
                visit(p + cols);
            }
            if j > 0 {
                visit(p - 1);
            }
            if j + 1 < cols {
                visit(p + 1);
            }
        }
        next.sort_unstable();
        next.dedup();
        frontier = next;
    }
    let amb = f.manifold().ambient_dim();
    let mut data = f.data().to_vec();
    for p in 0..n {
        if !f.is_present(p) {
            let s = source[p];
            let src: Vec<f64> = f.pixel(s).to_vec();
            data[p * amb..(p + 1) * amb].copy_from_slice(&src);
        }
    }
    ManifoldImage::new(f.manifold(), rows, cols, data, None)
}

/// Mask keeping a border band: pixel (i, j), 1-based, is present iff
/// `min(i, rows - i, j, cols - j) <= width`.
pub fn border_mask(rows: usize, cols: usize, width: usize) -> Vec<bool> {
    let mut mask = Vec::with_capacity(rows * cols);
    for i in 1..=rows {
        for j in 1..=cols {
            let m = (i.min(rows - i)).min(j.min(cols - j));
            mask.push(m <= width);
        }
    }
    mask
}

// ----------------------------------------------------------------------
// Synthetic data
// ----------------------------------------------------------------------

/// Piecewise-constant quadrant phantom: four well-separated values, one per
/// image quadrant, each at tangent distance about `separation` from the
/// backend's canonical base point.
pub fn phantom(m: Manifold, rows: usize, cols: usize, separation: f64) -> Result<ManifoldImage> {
    if rows == 0 || cols == 0 {
        return Err(GeometryError::InvalidParameter(
            "phantom needs a nonempty grid".into(),
        ));
    }
    let origin = m.origin();
    let basis = m.orthonormal_basis_raw(origin.coords());
    let e0 = basis[0];
    let e1 = if basis.len() > 1 { basis[1] } else { basis[0] };
    let combine = |a: f64, b: f64| {
        let mut v = Coords::zeros(m.tangent_dim());
        for (i, c) in v.iter_mut().enumerate() {
            *c = separation * (a * e0[i] + b * e1[i]);
        }
        m.exp_raw(origin.coords(), &v)
    };
    // for 1-dimensional backends e1 == e0, which still yields four
    // distinct values
    let values = [
        combine(0.0, 0.0),
        combine(1.0, 0.0),
        combine(0.0, 1.0),
        combine(1.0, 1.0),
    ];
    let amb = m.ambient_dim();
    let mut data = Vec::with_capacity(rows * cols * amb);
    for i in 0..rows {
        for j in 0..cols {
            let q = (usize::from(i >= rows / 2) << 1) | usize::from(j >= cols / 2);
            data.extend_from_slice(&values[q]);
        }
    }
    ManifoldImage::new(m, rows, cols, data, None)
}

/// Perturb every pixel by an isotropic Gaussian tangent vector with the
/// given per-coordinate standard deviation, mapped back through exp.
/// Deterministic under a fixed seed.
pub fn add_tangent_noise(img: &ManifoldImage, sigma_n: f64, seed: u64) -> Result<ManifoldImage> {
    if !sigma_n.is_finite() || sigma_n < 0.0 {
        return Err(GeometryError::InvalidParameter(format!(
            "noise level must be nonnegative, got {sigma_n}"
        )));
    }
    if sigma_n == 0.0 {
        return Ok(img.clone());
    }
    let m = img.manifold();
    let amb = m.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = img.data().to_vec();
    for p in 0..img.n_pixels() {
        let x = &data[p * amb..(p + 1) * amb];
        let v = m.random_tangent_raw(x, sigma_n, &mut rng);
        let y = m.exp_raw(x, &v);
        data[p * amb..(p + 1) * amb].copy_from_slice(&y);
    }
    ManifoldImage::new(m, img.rows(), img.cols(), data, img.mask().map(<[bool]>::to_vec))
}

// ----------------------------------------------------------------------
// Scalar rasters
// ----------------------------------------------------------------------

/// Grayscale raster with values in [0, 1].
#[derive(Clone, Debug)]
pub struct ScalarImage {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ScalarImage {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, PipelineError> {
        if rows * cols == 0 || data.len() != rows * cols {
            return Err(PipelineError::InvalidInput(format!(
                "scalar image {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(ScalarImage { rows, cols, data })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Read a binary 8-bit PGM (P5); values are scaled to [0, 1].
pub fn read_pgm(path: &Path) -> Result<ScalarImage, PipelineError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut token = || -> Result<String, PipelineError> {
        // skip whitespace and '#' comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(PipelineError::BadFile("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(PipelineError::BadFile("only binary PGM (P5) is supported".into()));
    }
    let cols: usize = token()?
        .parse()
        .map_err(|_| PipelineError::BadFile("bad PGM width".into()))?;
    let rows: usize = token()?
        .parse()
        .map_err(|_| PipelineError::BadFile("bad PGM height".into()))?;
    let maxval: usize = token()?
        .parse()
        .map_err(|_| PipelineError::BadFile("bad PGM maxval".into()))?;
    if maxval == 0 || maxval > 255 {
        return Err(PipelineError::BadFile(format!(
            "unsupported PGM maxval {maxval}"
        )));
    }
    pos += 1; // single whitespace after maxval
    if bytes.len() < pos + rows * cols {
        return Err(PipelineError::BadFile("truncated PGM payload".into()));
    }
    let data = bytes[pos..pos + rows * cols]
        .iter()
        .map(|&b| b as f64 / maxval as f64)
        .collect();
    ScalarImage::new(rows, cols, data)
}

/// Write a binary 8-bit PGM (P5).
pub fn write_pgm(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    w.write_all(pixels)?;
    Ok(())
}

// ----------------------------------------------------------------------
// Structure tensors
// ----------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct StructureTensorConfig {
    /// Gaussian std for pre-smoothing the image, in pixels.
    pub sigma: f64,
    /// Gaussian std for smoothing the gradient outer products, in pixels.
    pub rho: f64,
    /// Scale each tensor to determinant 1 (placing it on the det-1 SPD
    /// backend).
    pub normalize_det1: bool,
}

impl Default for StructureTensorConfig {
    fn default() -> Self {
        StructureTensorConfig {
            sigma: 0.8,
            rho: 0.35,
            normalize_det1: true,
        }
    }
}

/// Discrete Gaussian sampled at integer offsets, truncated to [-3 std,
/// 3 std] and renormalized to sum 1 (so constant images are preserved).
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).floor() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Mirror index for out-of-range access (half-sample symmetry, so the
/// first reflected sample repeats the boundary sample).
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    // period 2n triangular wave
    i = i.rem_euclid(2 * n);
    if i >= n {
        i = 2 * n - 1 - i;
    }
    i as usize
}

fn convolve_separable(img: &ScalarImage, kernel: &[f64]) -> ScalarImage {
    let (rows, cols) = (img.rows, img.cols);
    let radius = kernel.len() as isize / 2;
    let mut tmp = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let jj = mirror(j as isize + t as isize - radius, cols);
                acc += w * img.data[i * cols + jj];
            }
            tmp[i * cols + j] = acc;
        }
    }
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let ii = mirror(i as isize + t as isize - radius, rows);
                acc += w * tmp[ii * cols + j];
            }
            out[i * cols + j] = acc;
        }
    }
    ScalarImage {
        rows,
        cols,
        data: out,
    }
}

/// Smoothed-gradient structure tensor field of a scalar image. Gradients
/// are forward differences with mirror boundary (zero difference across
/// the border); the per-pixel outer products are smoothed channelwise.
/// Pixels whose tensor is numerically singular (flat neighborhoods) are
/// excluded from the mask.
pub fn structure_tensor(
    img: &ScalarImage,
    cfg: &StructureTensorConfig,
) -> Result<ManifoldImage, PipelineError> {
    if cfg.sigma.is_nan() || cfg.sigma < 0.0 || cfg.rho.is_nan() || cfg.rho < 0.0 {
        return Err(PipelineError::InvalidInput(
            "structure tensor stds must be nonnegative".into(),
        ));
    }
    let (rows, cols) = (img.rows, img.cols);
    let smoothed = convolve_separable(img, &gaussian_kernel(cfg.sigma));
    // forward differences, mirrored: the difference across the last
    // row/column is zero
    let mut gv = vec![0.0; rows * cols];
    let mut gh = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            if i + 1 < rows {
                gv[i * cols + j] = smoothed.at(i + 1, j) - smoothed.at(i, j);
            }
            if j + 1 < cols {
                gh[i * cols + j] = smoothed.at(i, j + 1) - smoothed.at(i, j);
            }
        }
    }
    let chan = |f: &dyn Fn(usize) -> f64| ScalarImage {
        rows,
        cols,
        data: (0..rows * cols).map(f).collect(),
    };
    let kernel = gaussian_kernel(cfg.rho);
    let j11 = convolve_separable(&chan(&|p| gv[p] * gv[p]), &kernel);
    let j12 = convolve_separable(&chan(&|p| gv[p] * gh[p]), &kernel);
    let j22 = convolve_separable(&chan(&|p| gh[p] * gh[p]), &kernel);

    let manifold = if cfg.normalize_det1 {
        Manifold::SpdDet1
    } else {
        Manifold::spd(2)?
    };
    let mut data = Vec::with_capacity(rows * cols * 4);
    let mut mask = Vec::with_capacity(rows * cols);
    for p in 0..rows * cols {
        let (a, b, c) = (j11.data[p], j12.data[p], j22.data[p]);
        let det = a * c - b * b;
        let half_trace = 0.5 * (a + c);
        let disc = (half_trace * half_trace - det).max(0.0).sqrt();
        let lambda_min = half_trace - disc;
        if lambda_min <= 1e-12 {
            // flat or rank-deficient neighborhood: excluded from V
            data.extend_from_slice(&[1.0, 0.0, 0.0, 1.0]);
            mask.push(false);
            continue;
        }
        if cfg.normalize_det1 {
            let s = 1.0 / det.sqrt();
            data.extend_from_slice(&[a * s, b * s, b * s, c * s]);
        } else {
            data.extend_from_slice(&[a, b, b, c]);
        }
        mask.push(true);
    }
    Ok(ManifoldImage::new(manifold, rows, cols, data, Some(mask))?)
}

// ----------------------------------------------------------------------
// Gaussian maximum-likelihood images
// ----------------------------------------------------------------------

/// Per-pixel maximum-likelihood Gaussian parameters from a stack of m >= 2
/// scalar images: the sample mean and the biased (1/m) standard deviation.
/// Pixels with zero sample deviation are excluded from the mask.
pub fn gaussian_ml_image(stack: &[ScalarImage]) -> Result<ManifoldImage, PipelineError> {
    let m = stack.len();
    if m < 2 {
        return Err(PipelineError::InvalidInput(format!(
            "maximum-likelihood estimation needs at least 2 images, got {m}"
        )));
    }
    let (rows, cols) = (stack[0].rows, stack[0].cols);
    for img in stack {
        if img.rows != rows || img.cols != cols {
            return Err(PipelineError::InvalidInput(
                "stack images must share dimensions".into(),
            ));
        }
    }
    let n = rows * cols;
    let mut data = Vec::with_capacity(n * 2);
    let mut mask = Vec::with_capacity(n);
    for p in 0..n {
        let mean = stack.iter().map(|g| g.data[p]).sum::<f64>() / m as f64;
        let var = stack
            .iter()
            .map(|g| (g.data[p] - mean) * (g.data[p] - mean))
            .sum::<f64>()
            / m as f64;
        let sigma = var.sqrt();
        if sigma > 0.0 {
            data.extend_from_slice(&[mean, sigma]);
            mask.push(true);
        } else {
            data.extend_from_slice(&[mean, 1.0]);
            mask.push(false);
        }
    }
    Ok(ManifoldImage::new(
        Manifold::GaussianFisher,
        rows,
        cols,
        data,
        Some(mask),
    )?)
}

// ----------------------------------------------------------------------
// Raster export
// ----------------------------------------------------------------------

/// Scalar channel extracted from a manifold image for raster export.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportChannel {
    /// Gaussian mean (gaussian-fisher backend).
    Mean,
    /// Gaussian standard deviation (gaussian-fisher backend).
    Std,
    /// Fractional-anisotropy-style eigenvalue spread over eigenvalue norm
    /// (SPD backends).
    Anisotropy,
    /// Matrix trace (SPD backends).
    Trace,
}

impl std::str::FromStr for ExportChannel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mean" => Ok(ExportChannel::Mean),
            "std" => Ok(ExportChannel::Std),
            "anisotropy" => Ok(ExportChannel::Anisotropy),
            "trace" => Ok(ExportChannel::Trace),
            other => Err(format!("unknown channel {other:?}")),
        }
    }
}

#[derive(Serialize)]
struct ExportSidecar<'a> {
    min: f64,
    max: f64,
    channel: &'a str,
}

/// Extract a scalar channel, min-max scale it to 8 bits, and write a
/// binary PGM plus a JSON sidecar recording the scaling. A degenerate
/// (constant) range maps everything to 0; absent pixels render as 0.
pub fn export_field(
    img: &ManifoldImage,
    channel: ExportChannel,
    path: &Path,
) -> Result<(), PipelineError> {
    let m = img.manifold();
    let spd_n = match (channel, m) {
        (ExportChannel::Mean | ExportChannel::Std, Manifold::GaussianFisher) => 0,
        (ExportChannel::Anisotropy | ExportChannel::Trace, Manifold::Spd { n }) => n,
        (ExportChannel::Anisotropy | ExportChannel::Trace, Manifold::SpdDet1) => 2,
        _ => {
            return Err(PipelineError::InvalidInput(format!(
                "channel {channel:?} is not defined for {m:?}"
            )))
        }
    };
    let n = img.n_pixels();
    let mut values = vec![0.0f64; n];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (p, slot) in values.iter_mut().enumerate() {
        if !img.is_present(p) {
            continue;
        }
        let c = img.pixel(p);
        let v = match channel {
            ExportChannel::Mean => c[0],
            ExportChannel::Std => c[1],
            ExportChannel::Trace => (0..spd_n).map(|i| c[i * spd_n + i]).sum(),
            ExportChannel::Anisotropy => {
                let vals = spd::sym_eigenvalues(c, spd_n)?;
                let mean = vals.iter().sum::<f64>() / spd_n as f64;
                let spread: f64 = vals.iter().map(|l| (l - mean) * (l - mean)).sum();
                let norm: f64 = vals.iter().map(|l| l * l).sum();
                if norm > 0.0 {
                    (spd_n as f64 / (spd_n as f64 - 1.0) * spread / norm).sqrt()
                } else {
                    0.0
                }
            }
        };
        *slot = v;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 0.0;
    }
    let range = hi - lo;
    let bytes: Vec<u8> = (0..n)
        .map(|p| {
            if !img.is_present(p) || range <= 0.0 {
                0u8
            } else {
                (((values[p] - lo) / range) * 255.0).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect();
    write_pgm(path, img.rows(), img.cols(), &bytes)?;
    let sidecar = ExportSidecar {
        min: lo,
        max: hi,
        channel: match channel {
            ExportChannel::Mean => "mean",
            ExportChannel::Std => "std",
            ExportChannel::Anisotropy => "anisotropy",
            ExportChannel::Trace => "trace",
        },
    };
    let sidecar_path = format!("{}.json", path.display());
    let mut w = BufWriter::new(File::create(sidecar_path)?);
    serde_json::to_writer_pretty(&mut w, &sidecar)?;
    w.write_all(b"\n")?;
    Ok(())
}
