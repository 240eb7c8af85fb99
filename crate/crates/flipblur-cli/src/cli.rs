//! Command-line surface. Values stay as strings here; `config` resolves
//! and validates them so file- and flag-provided values share one error
//! path.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "flipblur",
    version,
    about = "Structured blur operators, flipped-system restoration, and spectral analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Blur a scene, add noise, and write blurred.pgm plus a JSON sidecar
    Blur(RunArgs),
    /// Restore a blurred scene; writes history.csv, metrics.json, and
    /// restored PGMs at the best and discrepancy iterations
    Deblur(RunArgs),
    /// Dense spectra of the plain and flipped operators, the symbol
    /// comparison, and the boundary-correction norm ladder
    Spectrum(RunArgs),
    /// Run the built-in consistency checks and print a pass/fail table
    Verify,
}

/// Flags shared by the experiment subcommands. Every field mirrors a key
/// of the JSON config; flags override the file.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// JSON config file with the same keys as these flags
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Kernel as a text grid of coefficients (odd extent per dimension)
    #[arg(long, value_name = "FILE")]
    pub psf: Option<PathBuf>,
    /// Ground-truth image as PGM (P2 or P5)
    #[arg(long, value_name = "FILE")]
    pub image: Option<PathBuf>,
    /// Synthetic ground truth: ramp, checker, or blob
    #[arg(long, value_name = "KIND")]
    pub synth: Option<String>,
    /// Scene extent: N (square, or 1xN for 1D kernels), RxC, or R,C
    #[arg(long, value_name = "SPEC")]
    pub size: Option<String>,
    /// Boundary condition: zero, periodic, reflective, antireflective
    #[arg(long, value_name = "KIND")]
    pub bc: Option<String>,
    /// Solve the flipped system Y A f = Y g
    #[arg(long)]
    pub flip: bool,
    /// Force the plain system even if the config file says flip
    #[arg(long)]
    pub no_flip: bool,
    /// Krylov solver: gmres or minres
    #[arg(long, value_name = "NAME")]
    pub solver: Option<String>,
    /// Relative noise level (the perturbation has norm gamma * ||A f||)
    #[arg(long, value_name = "G")]
    pub gamma: Option<f64>,
    /// Noise generator seed
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Discrepancy safety factor (stop at ||r|| <= tau * delta), tau >= 1
    #[arg(long, value_name = "T")]
    pub tau: Option<f64>,
    /// Iteration budget
    #[arg(long, value_name = "N")]
    pub max_iter: Option<usize>,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Largest dense matrix order the spectrum command may assemble
    #[arg(long, value_name = "N")]
    pub dense_cap: Option<usize>,
}
