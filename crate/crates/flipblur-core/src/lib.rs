//! Deblurring toolkit built around structured blur operators.
//!
//! A discrete blur couples every pixel of an image with pixels outside the
//! field of view, so a finite linear model must pick a boundary condition.
//! This crate implements the four classical choices (zero, periodic,
//! reflective, anti-reflective), the flip trick that symmetrizes the
//! resulting matrices so that symmetric Krylov methods apply, GMRES/MINRES
//! restoration with discrepancy-principle stopping, and dense spectral
//! verification of the clustering and eigenvalue-distribution behavior that
//! makes the flipped operators attractive.
//!
//! Module map:
//! - [`psf`]: point spread functions, their generating symbol, and sampled
//!   eigenvalue-distribution references.
//! - [`imaging`]: images, PGM IO, synthetic scenes, noise, and error metrics.
//! - [`boundary`]: boundary extension, matrix-free operator application,
//!   dense assembly, and the flip.
//! - [`operator`]: the minimal linear-operator trait the solvers consume.
//! - [`krylov`]: GMRES and MINRES with per-iteration history and snapshots.
//! - [`spectral`]: dense eigenvalues/singular values, Schatten norms,
//!   cluster counts, and symbol comparisons.
//! - [`verify`]: self-contained consistency checks wired to `flipblur verify`.

pub mod boundary;
mod error;
pub mod imaging;
pub mod krylov;
pub mod operator;
pub mod psf;
pub mod rng;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};

pub use boundary::{BcKind, BlurOperator};
pub use imaging::Image;
pub use psf::Psf;

/// Re-exported so downstream crates use the same dense-matrix types.
pub use nalgebra;
