//! Experiment configuration: JSON file, flag overrides, validation.
//!
//! A run is described by a flat JSON object so grids of experiments can be
//! generated by any scripting tool. Every field can also be given on the
//! command line, and flags win over file values. Validation failures carry
//! the offending field name and map to the usage exit code.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flipblur_core::boundary::DEFAULT_DENSE_CAP;
use flipblur_core::imaging::SynthKind;
use flipblur_core::{BcKind, Error as CoreError};
use serde::{Deserialize, Serialize};

use crate::cli::RunArgs;

/// Exit codes: 0 success, 2 usage, 3 numerical, 4 verification; IO troubles
/// that are neither are a plain 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Verification(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "{m}"),
            CliError::Verification(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            // the solver or factorization gave up on well-formed input
            CoreError::NumericalFailure(_) | CoreError::EigensolverFailure { .. } => {
                CliError::Numerical(e.to_string())
            }
            // everything else is a malformed request or input file
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Gmres,
    Minres,
}

impl FromStr for Solver {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gmres" => Ok(Solver::Gmres),
            "minres" => Ok(Solver::Minres),
            other => Err(format!("unknown solver {other:?} (gmres|minres)")),
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::Gmres => "gmres",
            Solver::Minres => "minres",
        })
    }
}

/// Ground-truth source: a PGM file or a named synthetic scene.
#[derive(Debug, Clone)]
pub enum TruthSource {
    ImagePath(PathBuf),
    Synth(SynthKind),
}

/// Requested scene extent before the kernel arity is known: a bare `N`
/// means `1 x N` for 1D kernels and `N x N` for 2D ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeSpec {
    Square(usize),
    Exact(usize, usize),
}

impl SizeSpec {
    pub fn for_dims(self, dims: u8) -> (usize, usize) {
        match self {
            SizeSpec::Square(n) if dims == 1 => (1, n),
            SizeSpec::Square(n) => (n, n),
            SizeSpec::Exact(r, c) => (r, c),
        }
    }
}

impl FromStr for SizeSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(['x', ',']).collect();
        let parse = |tok: &str| {
            tok.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| format!("size component {tok:?} is not a positive integer"))
        };
        match parts.as_slice() {
            [n] => Ok(SizeSpec::Square(parse(n)?)),
            [r, c] => Ok(SizeSpec::Exact(parse(r)?, parse(c)?)),
            _ => Err(format!("size {s:?} must be N, RxC, or R,C")),
        }
    }
}

/// The flat JSON schema. Unknown keys are rejected so typos fail loudly.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub psf_path: Option<String>,
    pub image_path: Option<String>,
    pub synth: Option<String>,
    pub size: Option<String>,
    pub bc: Option<String>,
    pub flip: Option<bool>,
    pub solver: Option<String>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub tau: Option<f64>,
    pub max_iter: Option<usize>,
    pub output_dir: Option<String>,
    pub dense_cap: Option<usize>,
}

/// A fully resolved run description. Optional fields are those not every
/// command needs; each command demands its own set via the accessors below.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub psf_path: Option<PathBuf>,
    pub truth: Option<TruthSource>,
    pub size: Option<SizeSpec>,
    pub bc: Option<BcKind>,
    pub flip: bool,
    pub solver: Solver,
    pub gamma: f64,
    pub seed: u64,
    pub tau: f64,
    pub max_iter: usize,
    pub output_dir: Option<PathBuf>,
    pub dense_cap: usize,
}

fn parse_field<T: FromStr<Err = String>>(field: &str, value: &str) -> Result<T, CliError> {
    value
        .parse::<T>()
        .map_err(|e| CliError::usage(format!("{field}: {e}")))
}

impl ExperimentConfig {
    /// Merges the config file (if any) with the flags and validates the
    /// result. Flags override file values field by field.
    pub fn resolve(args: &RunArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::usage(format!("config {}: {e}", path.display()))
                })?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };

        if args.flip && args.no_flip {
            return Err(CliError::usage("flip: --flip and --no-flip conflict"));
        }
        let flip = if args.flip {
            true
        } else if args.no_flip {
            false
        } else {
            file.flip.unwrap_or(false)
        };

        let psf_path = args
            .psf
            .clone()
            .or_else(|| file.psf_path.as_ref().map(PathBuf::from));
        let image_path = args
            .image
            .clone()
            .or_else(|| file.image_path.as_ref().map(PathBuf::from));
        let synth_name = args.synth.clone().or_else(|| file.synth.clone());
        if image_path.is_some() && synth_name.is_some() {
            return Err(CliError::usage(
                "image/synth: give a truth image or a synthetic scene, not both",
            ));
        }
        let truth = match (&image_path, &synth_name) {
            (Some(p), None) => Some(TruthSource::ImagePath(p.clone())),
            (None, Some(name)) => Some(TruthSource::Synth(parse_synth(name)?)),
            (None, None) => None,
            (Some(_), Some(_)) => unreachable!(),
        };

        let size = match args.size.clone().or_else(|| file.size.clone()) {
            Some(s) => Some(parse_field::<SizeSpec>("size", &s)?),
            None => None,
        };
        let bc = match args.bc.clone().or_else(|| file.bc.clone()) {
            Some(s) => Some(parse_field::<BcKind>("bc", &s)?),
            None => None,
        };
        let solver = match args.solver.clone().or_else(|| file.solver.clone()) {
            Some(s) => parse_field::<Solver>("solver", &s)?,
            None => Solver::Gmres,
        };

        let gamma = args.gamma.or(file.gamma).unwrap_or(0.0);
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(CliError::usage(format!(
                "gamma: must be finite and nonnegative, got {gamma}"
            )));
        }
        let tau = args.tau.or(file.tau).unwrap_or(1.0);
        if !tau.is_finite() || tau < 1.0 {
            return Err(CliError::usage(format!("tau: must be at least 1, got {tau}")));
        }
        let max_iter = args.max_iter.or(file.max_iter).unwrap_or(50);
        if max_iter == 0 {
            return Err(CliError::usage("max_iter: must be at least 1"));
        }
        let dense_cap = args.dense_cap.or(file.dense_cap).unwrap_or(DEFAULT_DENSE_CAP);
        if dense_cap == 0 {
            return Err(CliError::usage("dense_cap: must be at least 1"));
        }

        Ok(Self {
            psf_path,
            truth,
            size,
            bc,
            flip,
            solver,
            gamma,
            seed: args.seed.or(file.seed).unwrap_or(0),
            tau,
            max_iter,
            output_dir: args
                .out
                .clone()
                .or_else(|| file.output_dir.as_ref().map(PathBuf::from)),
            dense_cap,
        })
    }

    pub fn require_psf(&self) -> Result<&Path, CliError> {
        self.psf_path
            .as_deref()
            .ok_or_else(|| CliError::usage("psf: required (--psf or config psf_path)"))
    }

    pub fn require_out(&self) -> Result<&Path, CliError> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| CliError::usage("out: required (--out or config output_dir)"))
    }

    pub fn require_truth(&self) -> Result<&TruthSource, CliError> {
        self.truth.as_ref().ok_or_else(|| {
            CliError::usage("image/synth: a truth source is required (--image or --synth)")
        })
    }

    pub fn require_size(&self) -> Result<SizeSpec, CliError> {
        self.size
            .ok_or_else(|| CliError::usage("size: required (--size or config size)"))
    }
}

fn parse_synth(name: &str) -> Result<SynthKind, CliError> {
    match name {
        "ramp" => Ok(SynthKind::Ramp),
        "checker" => Ok(SynthKind::Checker),
        "blob" => Ok(SynthKind::Blob),
        other => Err(CliError::usage(format!(
            "synth: unknown scene {other:?} (ramp|checker|blob)"
        ))),
    }
}
