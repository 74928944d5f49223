//! Command-line interface: one verb per pipeline stage.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when a solver stopped
//! at its iteration cap without reaching the requested tolerance (outputs
//! are still written).

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mvtv::functional::SplitTerm;
use mvtv::image::ManifoldImage;
use mvtv::manifold::{Manifold, Point, ProductPoint};
use mvtv::pipeline::{
    add_tangent_noise, border_mask, denoise, gaussian_ml_image, nearest_neighbor_fill, phantom,
    read_pgm, split_rof, structure_tensor, ExportChannel, SolverKind, StructureTensorConfig,
};
use mvtv::prox::Power;
use mvtv::solvers::{
    dr_solve, evaluate_functional, Schedule, SolverConfig, SolverTrace, Termination,
};
use mvtv::PipelineError;

#[derive(Parser)]
#[command(
    name = "mvtv",
    version,
    about = "Total-variation restoration of manifold-valued images"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a piecewise-constant phantom, optionally noisy and masked
    Synth(SynthArgs),
    /// Det-1 structure tensor field of a grayscale PGM image
    Stensor(StensorArgs),
    /// Per-pixel Gaussian maximum-likelihood parameters from a PGM stack
    Gaussml(GaussmlArgs),
    /// Denoise an image by TV-regularized restoration
    Denoise(RestoreArgs),
    /// Restore an image with missing pixels (mask required)
    Inpaint(RestoreArgs),
    /// Evaluate the restoration objective at an image
    Eval(EvalArgs),
    /// Export a scalar channel of an image as PGM + JSON sidecar
    Export(ExportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Manifold kind: euclidean | hyperbolic | spd | spd-det1 | gaussian-fisher
    #[arg(long, default_value = "hyperbolic")]
    manifold: String,
    /// Dimension parameter (hyperbolic/euclidean dimension or SPD matrix size)
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 8)]
    rows: usize,
    #[arg(long, default_value_t = 8)]
    cols: usize,
    /// Tangent separation between the quadrant values
    #[arg(long, default_value_t = 0.8)]
    separation: f64,
    /// Tangent-space noise level (0 = clean)
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Attach a mask keeping only a border band of this width
    #[arg(long)]
    mask_border: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct StensorArgs {
    /// Input grayscale image (binary PGM)
    input: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    sigma: f64,
    #[arg(long, default_value_t = 0.35)]
    rho: f64,
    /// Keep raw (unnormalized) tensors on the SPD backend
    #[arg(long)]
    no_det1: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct GaussmlArgs {
    /// Input stack (two or more binary PGM images)
    inputs: Vec<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverChoice {
    Pdra,
    Cppa,
    Dr,
}

#[derive(Args)]
struct RestoreArgs {
    /// Input image (.mimg)
    input: PathBuf,
    /// Regularization weight
    #[arg(long)]
    alpha: f64,
    /// Prox scale
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    /// Constant relaxation parameter in (0, 1)
    #[arg(long, default_value_t = 0.9)]
    lambda: f64,
    /// Stopping tolerance on the per-iteration movement
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = SolverChoice::Pdra)]
    solver: SolverChoice,
    /// Seed reserved for randomized solver variants
    #[arg(long)]
    seed: Option<u64>,
    /// Mask of known pixels (PGM, nonzero = present); overrides the mask
    /// stored in the input
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Write the per-iteration trace as CSV
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Image to evaluate (.mimg)
    #[arg(long)]
    input: PathBuf,
    /// Data image the objective is anchored at (.mimg)
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    alpha: f64,
}

#[derive(Args)]
struct ExportArgs {
    /// Input image (.mimg)
    input: PathBuf,
    /// mean | std (Gaussian backend), anisotropy | trace (SPD backends)
    #[arg(long)]
    channel: String,
    #[arg(short, long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, PipelineError> {
    match cli.cmd {
        Command::Synth(a) => {
            let m = Manifold::from_kind_str(&a.manifold, a.dim)?;
            let mut img = phantom(m, a.rows, a.cols, a.separation)?;
            if a.noise > 0.0 {
                img = add_tangent_noise(&img, a.noise, a.seed)?;
            }
            if let Some(w) = a.mask_border {
                img.set_mask(Some(border_mask(a.rows, a.cols, w)))?;
            }
            img.save(&a.output)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Stensor(a) => {
            let scalar = read_pgm(&a.input)?;
            let cfg = StructureTensorConfig {
                sigma: a.sigma,
                rho: a.rho,
                normalize_det1: !a.no_det1,
            };
            let tensors = structure_tensor(&scalar, &cfg)?;
            tensors.save(&a.output)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Gaussml(a) => {
            let stack = a
                .inputs
                .iter()
                .map(|p| read_pgm(p))
                .collect::<Result<Vec<_>, _>>()?;
            let img = gaussian_ml_image(&stack)?;
            img.save(&a.output)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Denoise(a) | Command::Inpaint(a) => restore(a),
        Command::Eval(a) => {
            let u = ManifoldImage::load(&a.input)?;
            let f = ManifoldImage::load(&a.data)?;
            let split = split_rof(&f, a.alpha)?;
            let value = evaluate_functional(&split, &u)?;
            println!("{value:.11e}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Export(a) => {
            let img = ManifoldImage::load(&a.input)?;
            let channel: ExportChannel = a
                .channel
                .parse()
                .map_err(PipelineError::InvalidInput)?;
            mvtv::pipeline::export_field(&img, channel, &a.output)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn restore(a: RestoreArgs) -> Result<ExitCode, PipelineError> {
    let mut f = ManifoldImage::load(&a.input)?;
    if let Some(mask_path) = &a.mask {
        let raster = read_pgm(mask_path)?;
        if raster.rows != f.rows() || raster.cols != f.cols() {
            return Err(PipelineError::InvalidInput(format!(
                "mask is {}x{}, image is {}x{}",
                raster.rows,
                raster.cols,
                f.rows(),
                f.cols()
            )));
        }
        f.set_mask(Some(raster.data.iter().map(|&v| v > 0.0).collect()))?;
    }

    let mut cfg = SolverConfig::new(a.eta);
    cfg.lambda = Schedule::Constant(a.lambda);
    cfg.eps = a.eps;
    cfg.max_iter = a.max_iter;
    cfg.rng_seed = a.seed;

    let (u, trace) = match a.solver {
        SolverChoice::Pdra => denoise(&f, a.alpha, SolverKind::Pdra, &cfg)?,
        SolverChoice::Cppa => denoise(&f, a.alpha, SolverKind::Cppa, &cfg)?,
        SolverChoice::Dr => dr_restore(&f, a.alpha, &cfg)?,
    };
    u.save(&a.output)?;
    if let Some(path) = &a.trace {
        let mut w = BufWriter::new(File::create(path)?);
        trace.write_csv(&mut w)?;
    }
    if trace.karcher_warnings > 0 {
        eprintln!(
            "warning: {} per-pixel mean computations hit their iteration cap",
            trace.karcher_warnings
        );
    }
    match trace.termination {
        Termination::Converged => Ok(ExitCode::SUCCESS),
        Termination::MaxIterations => {
            eprintln!(
                "warning: stopped after {} iterations without reaching eps = {:e}",
                trace.iterations, a.eps
            );
            Ok(ExitCode::from(3))
        }
    }
}

/// The plain two-term iteration applies when the objective splits into the
/// data term plus at most one nonempty difference group (single-row or
/// single-column images up to two pixels per direction); larger grids need
/// the parallel solver.
fn dr_restore(
    f: &ManifoldImage,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<(ManifoldImage, SolverTrace), PipelineError> {
    let split = split_rof(f, alpha)?;
    let u0 = nearest_neighbor_fill(f)?;
    let mut terms = split.terms().to_vec();
    let data = terms.remove(0);
    let nonempty: Vec<SplitTerm> = terms
        .into_iter()
        .filter(|t| t.support_len() > 0)
        .collect();
    if nonempty.len() > 1 {
        return Err(PipelineError::InvalidInput(
            "the dr solver needs an objective with two componentwise terms; \
             this grid produces more difference groups — use pdra or cppa"
                .into(),
        ));
    }
    let phi = nonempty
        .into_iter()
        .next()
        .unwrap_or_else(|| SplitTerm::pairs(0.0, Power::One, Vec::new()));
    let comps: Vec<Point> = (0..u0.n_pixels()).map(|p| u0.point(p)).collect();
    let t0 = ProductPoint::new(comps)?;
    let (x, trace) = dr_solve(&phi, &data, &t0, cfg)?;
    let amb = f.manifold().ambient_dim();
    let mut out = vec![0.0; u0.n_pixels() * amb];
    for (p, point) in x.components().iter().enumerate() {
        out[p * amb..(p + 1) * amb].copy_from_slice(point.coords());
    }
    Ok((
        ManifoldImage::new(f.manifold(), f.rows(), f.cols(), out, None)?,
        trace,
    ))
}
