//! Shared plumbing for the experiment subcommands: loading kernels and
//! truth scenes, the blur sidecar schema, and deterministic file output.

use std::path::{Path, PathBuf};

use flipblur_core::imaging::{read_pgm, synth_image};
use flipblur_core::{BcKind, Image, Psf};
use serde::{Deserialize, Serialize};

use crate::config::{CliError, ExperimentConfig, TruthSource};

pub const BLURRED_PGM: &str = "blurred.pgm";
pub const BLURRED_SIDECAR: &str = "blurred.json";
pub const HISTORY_CSV: &str = "history.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const RESTORED_BEST_PGM: &str = "restored_best.pgm";
pub const RESTORED_DISCREPANCY_PGM: &str = "restored_discrepancy.pgm";

/// Blur provenance stored next to the blurred image; everything deblur
/// needs to rebuild the stopping rule without re-running the blur.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub bc: String,
    pub shape: [usize; 2],
    pub gamma: f64,
    pub seed: u64,
    /// `||A f||_2` of the noise-free blurred image.
    pub norm_af: f64,
    /// Noise norm `gamma * ||A f||_2`; the discrepancy stop compares
    /// residuals against `tau * delta`.
    pub delta: f64,
    /// Quantization depth of the stored PGM.
    pub maxval: u16,
}

impl Sidecar {
    pub fn bc_kind(&self) -> Result<BcKind, CliError> {
        self.bc
            .parse::<BcKind>()
            .map_err(|e| CliError::Usage(format!("sidecar bc: {e}")))
    }
}

pub fn load_psf(path: &Path) -> Result<Psf, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("psf {}: {e}", path.display())))?;
    Psf::parse(&text).map_err(|e| CliError::usage(format!("psf {}: {e}", path.display())))
}

pub fn load_truth(source: &TruthSource, shape: (usize, usize)) -> Result<Image, CliError> {
    match source {
        TruthSource::Synth(kind) => Ok(synth_image(*kind, shape)),
        TruthSource::ImagePath(path) => {
            let img = read_image(path)?;
            if img.shape() != shape {
                return Err(CliError::usage(format!(
                    "image {}: has shape {}x{}, run expects {}x{}",
                    path.display(),
                    img.rows(),
                    img.cols(),
                    shape.0,
                    shape.1
                )));
            }
            Ok(img)
        }
    }
}

pub fn read_image(path: &Path) -> Result<Image, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    read_pgm(&bytes).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Resolves the scene shape for commands whose truth may be a file: an
/// explicit size must agree with a loaded image; a synthetic scene needs
/// the size spelled out.
pub fn resolve_scene(
    cfg: &ExperimentConfig,
    psf: &Psf,
) -> Result<(Image, (usize, usize)), CliError> {
    let truth_source = cfg.require_truth()?;
    match truth_source {
        TruthSource::Synth(_) => {
            let shape = cfg.require_size()?.for_dims(psf.dims());
            Ok((load_truth(truth_source, shape)?, shape))
        }
        TruthSource::ImagePath(path) => {
            let img = read_image(path)?;
            let shape = img.shape();
            if let Some(spec) = cfg.size {
                let asked = spec.for_dims(psf.dims());
                if asked != shape {
                    return Err(CliError::usage(format!(
                        "size: {}x{} conflicts with image {} of shape {}x{}",
                        asked.0,
                        asked.1,
                        path.display(),
                        shape.0,
                        shape.1
                    )));
                }
            }
            Ok((img, shape))
        }
    }
}

pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))
}

pub fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing {name}: {e}")))?;
    text.push('\n');
    write_bytes(dir, name, text.as_bytes())
}

pub fn read_sidecar(dir: &Path) -> Result<Sidecar, CliError> {
    let path = dir.join(BLURRED_SIDECAR);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        CliError::usage(format!(
            "{}: {e} (run `flipblur blur` into this directory first)",
            path.display()
        ))
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}
