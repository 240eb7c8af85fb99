//! The `spectrum` subcommand: dense eigenvalues of the plain and flipped
//! operators, the comparison against the two-branch symbol rearrangement,
//! and the boundary-correction norms across a ladder of sizes.

use flipblur_core::boundary::flip_dense;
use flipblur_core::spectral::{compare_to_psi, eigen_dense, psi_nodes_for, singular_values_dense};
use flipblur_core::{BcKind, BlurOperator, Psf};
use serde::Serialize;

use crate::config::{CliError, ExperimentConfig};
use crate::pipeline::{ensure_out_dir, load_psf, write_bytes, write_json};

pub const EIGS_PLAIN_CSV: &str = "eigenvalues_plain.csv";
pub const EIGS_FLIPPED_CSV: &str = "eigenvalues_flipped.csv";
pub const PSI_CSV: &str = "psi_comparison.csv";
pub const W_NORMS_CSV: &str = "w_norms.csv";
pub const SPECTRUM_JSON: &str = "spectrum.json";

#[derive(Debug, Serialize)]
struct SpectrumSide {
    nonreal_count: usize,
    max_abs_imag: f64,
}

#[derive(Debug, Serialize)]
struct PsiSummary {
    mean_abs_deviation: f64,
    max_abs_deviation: f64,
}

#[derive(Debug, Serialize)]
struct SpectrumFile {
    bc: String,
    shape: [usize; 2],
    matrix_size: usize,
    plain: SpectrumSide,
    flipped: SpectrumSide,
    /// Null when no extent is even, so no two-branch sample of matching
    /// cardinality exists.
    psi: Option<PsiSummary>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let psf = load_psf(cfg.require_psf()?)?;
    let out = cfg.require_out()?.to_path_buf();
    let shape = cfg.require_size()?.for_dims(psf.dims());
    let bc = cfg.bc.unwrap_or(BcKind::Zero);

    let op = BlurOperator::new(psf.clone(), bc, shape)?;
    let a = op.assemble_dense_capped(cfg.dense_cap)?;
    let plain = eigen_dense(&a)?;
    let flipped = eigen_dense(&flip_dense(&a))?;

    ensure_out_dir(&out)?;
    write_bytes(&out, EIGS_PLAIN_CSV, plain.to_csv().as_bytes())?;
    write_bytes(&out, EIGS_FLIPPED_CSV, flipped.to_csv().as_bytes())?;

    let psi = match psi_nodes_for(shape) {
        Ok(nodes) => {
            let sample = psf.sample_psi(&nodes)?;
            let cmp = compare_to_psi(&flipped, &sample)?;
            write_bytes(&out, PSI_CSV, cmp.to_csv().as_bytes())?;
            Some(PsiSummary {
                mean_abs_deviation: cmp.mean_abs_deviation,
                max_abs_deviation: cmp.max_abs_deviation,
            })
        }
        Err(_) => None,
    };

    write_bytes(&out, W_NORMS_CSV, w_norms_csv(&psf, bc, shape, cfg.dense_cap)?.as_bytes())?;
    write_json(
        &out,
        SPECTRUM_JSON,
        &SpectrumFile {
            bc: bc.to_string(),
            shape: [shape.0, shape.1],
            matrix_size: a.nrows(),
            plain: SpectrumSide {
                nonreal_count: plain.nonreal_count,
                max_abs_imag: plain.max_abs_imag,
            },
            flipped: SpectrumSide {
                nonreal_count: flipped.nonreal_count,
                max_abs_imag: flipped.max_abs_imag,
            },
            psi,
        },
    )?;
    println!(
        "spectrum of {bc} at {}x{} (order {}): nonreal {} -> {} under flip",
        shape.0,
        shape.1,
        a.nrows(),
        plain.nonreal_count,
        flipped.nonreal_count
    );
    Ok(())
}

/// Trace and spectral norms of the boundary correction `W = A - T` at the
/// requested size and two halvings, clamped to the smallest legal extent.
fn w_norms_csv(
    psf: &Psf,
    bc: BcKind,
    shape: (usize, usize),
    cap: usize,
) -> Result<String, CliError> {
    let (m1, m2) = psf.half();
    let min1 = 2 * m1 + 1;
    let min2 = 2 * m2 + 1;
    let mut sizes: Vec<(usize, usize)> = [4usize, 2, 1]
        .iter()
        .map(|&div| {
            (
                if shape.0 == 1 { 1 } else { (shape.0 / div).max(min1) },
                (shape.1 / div).max(min2),
            )
        })
        .collect();
    sizes.dedup();

    let mut csv = String::from("rows,cols,trace_norm,spectral_norm\n");
    for size in sizes {
        let op = BlurOperator::new(psf.clone(), bc, size)?;
        let a = op.assemble_dense_capped(cap)?;
        let w = a - op.toeplitz_part(cap)?;
        let sv = singular_values_dense(&w)?;
        let trace: f64 = sv.iter().sum();
        let spectral = sv.first().copied().unwrap_or(0.0);
        csv.push_str(&format!("{},{},{trace},{spectral}\n", size.0, size.1));
    }
    Ok(csv)
}
