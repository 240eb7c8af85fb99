//! Dense spectral analysis of blur operators.
//!
//! Verifies the structural story at desk scale: the boundary correction
//! `W = A - T` (operator minus its Toeplitz part) has eigenvalues/singular
//! values clustered at zero, and the flipped operator's spectrum follows
//! the two-branch symbol rearrangement `+/- |f|`, with nonreal outliers
//! thinning as the flip symmetrizes the matrix.
//!
//! Everything here is dense and exact (Schur / SVD on assembled matrices);
//! the assembly cap keeps sizes honest.

use crate::error::{Error, Result};
use crate::psf::{Psf, PsiSample};
use nalgebra::{Complex, DMatrix};
use std::hash::{Hash, Hasher};

pub type Complex64 = Complex<f64>;

/// Nodes per dimension when bounding the symbol range densely.
pub const SYMBOL_RANGE_NODES: usize = 4096;

/// Eigenvalues of one dense operator with nonreal accounting.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    /// Count of eigenvalues with `|Im| > nonreal_tol`.
    pub nonreal_count: usize,
    pub max_abs_imag: f64,
    /// Threshold used for `nonreal_count`: relative to the matrix scale.
    pub nonreal_tol: f64,
}

impl SpectrumReport {
    /// Real parts sorted ascending; the view compared against symbol
    /// samples.
    pub fn sorted_real_parts(&self) -> Vec<f64> {
        let mut re: Vec<f64> = self.eigenvalues.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        re
    }

    /// CSV with columns `re,im`, rows sorted by `(re, im)` for stable
    /// diffs.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(f64, f64)> = self.eigenvalues.iter().map(|z| (z.re, z.im)).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut out = String::from("re,im\n");
        for (re, im) in rows {
            out.push_str(&format!("{re},{im}\n"));
        }
        out
    }
}

/// Eigenvalues via real Schur decomposition. The nonreal threshold is
/// `1e-10` times a spectral-norm estimate of the matrix.
pub fn eigen_dense(m: &DMatrix<f64>) -> Result<SpectrumReport> {
    eigen_dense_with_tol(m, 1e-10 * spectral_norm_estimate(m))
}

/// Eigenvalues with an explicit nonreal threshold.
pub fn eigen_dense_with_tol(m: &DMatrix<f64>, nonreal_tol: f64) -> Result<SpectrumReport> {
    assert_eq!(m.nrows(), m.ncols(), "eigenvalues need a square matrix");
    // max_niter = 0 iterates until convergence, matching the plain
    // Schur::new entry point
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 0).ok_or_else(|| {
        Error::EigensolverFailure {
            matrix_hash: matrix_hash(m),
        }
    })?;
    let eigen = schur.complex_eigenvalues();
    let eigenvalues: Vec<Complex64> = eigen.iter().copied().collect();
    let max_abs_imag = eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let nonreal_count = eigenvalues
        .iter()
        .filter(|z| z.im.abs() > nonreal_tol)
        .count();
    Ok(SpectrumReport {
        eigenvalues,
        nonreal_count,
        max_abs_imag,
        nonreal_tol,
    })
}

/// Singular values sorted descending.
pub fn singular_values_dense(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let svd = nalgebra::linalg::SVD::try_new(m.clone(), false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigensolverFailure {
            matrix_hash: matrix_hash(m),
        })?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Schatten p-norm (`p >= 1`; `f64::INFINITY` gives the spectral norm).
pub fn schatten_norm(m: &DMatrix<f64>, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidSchattenOrder { p });
    }
    let sv = singular_values_dense(m)?;
    if p.is_infinite() {
        return Ok(sv.first().copied().unwrap_or(0.0));
    }
    Ok(sv.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p))
}

/// Where a spectrum is expected to concentrate.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterSet {
    /// Finite set of points in the complex plane.
    Points(Vec<Complex64>),
    /// Real interval `[lo, hi]` embedded in the plane.
    Interval { lo: f64, hi: f64 },
}

impl ClusterSet {
    /// The single point `{0}`; where boundary corrections cluster.
    pub fn origin() -> Self {
        Self::Points(vec![Complex64::new(0.0, 0.0)])
    }

    /// `[-max|f|, max|f|]` from dense symbol sampling
    /// ([`SYMBOL_RANGE_NODES`] per dimension); the range of the two-branch
    /// rearrangement, where flipped operators cluster.
    pub fn symbol_range(psf: &Psf) -> Self {
        let max = psf.max_abs_symbol(SYMBOL_RANGE_NODES);
        Self::Interval { lo: -max, hi: max }
    }

    fn distance(&self, z: Complex64) -> f64 {
        match self {
            Self::Points(points) => points
                .iter()
                .map(|p| (z - p).norm())
                .fold(f64::INFINITY, f64::min),
            Self::Interval { lo, hi } => {
                let dx = if z.re < *lo {
                    lo - z.re
                } else if z.re > *hi {
                    z.re - hi
                } else {
                    0.0
                };
                dx.hypot(z.im)
            }
        }
    }
}

/// Outlier count of one spectrum against a cluster set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCount {
    pub epsilon: f64,
    pub set: ClusterSet,
    /// Eigenvalues farther than `epsilon` from the set.
    pub count_outside: usize,
    pub total: usize,
}

/// Counts eigenvalues farther than `epsilon` from `set`.
pub fn cluster_count(
    report: &SpectrumReport,
    set: &ClusterSet,
    epsilon: f64,
) -> Result<ClusterCount> {
    assert!(epsilon > 0.0, "cluster radius must be positive");
    if matches!(set, ClusterSet::Points(p) if p.is_empty()) {
        return Err(Error::InvalidClusterSet);
    }
    let count_outside = report
        .eigenvalues
        .iter()
        .filter(|&&z| set.distance(z) > epsilon)
        .count();
    Ok(ClusterCount {
        epsilon,
        set: set.clone(),
        count_outside,
        total: report.eigenvalues.len(),
    })
}

/// Sorted eigenvalue real parts against sorted symbol-rearrangement
/// samples of the same cardinality.
#[derive(Debug, Clone)]
pub struct SymbolComparison {
    pub eig_sorted: Vec<f64>,
    pub psi_sorted: Vec<f64>,
    /// `|eig_sorted[i] - psi_sorted[i]|`.
    pub deviations: Vec<f64>,
    pub max_abs_deviation: f64,
    pub mean_abs_deviation: f64,
}

impl SymbolComparison {
    /// CSV with columns `index,eig_real,psi_sample,deviation`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eig_real,psi_sample,deviation\n");
        for i in 0..self.eig_sorted.len() {
            out.push_str(&format!(
                "{i},{},{},{}\n",
                self.eig_sorted[i], self.psi_sorted[i], self.deviations[i]
            ));
        }
        out
    }
}

/// Pairs a spectrum with a psi sample of matching size.
pub fn compare_to_psi(report: &SpectrumReport, psi: &PsiSample) -> Result<SymbolComparison> {
    if report.eigenvalues.len() != psi.len() {
        return Err(Error::SampleSizeMismatch {
            eigenvalues: report.eigenvalues.len(),
            samples: psi.len(),
        });
    }
    let eig_sorted = report.sorted_real_parts();
    let psi_sorted = psi.values().to_vec();
    let deviations: Vec<f64> = eig_sorted
        .iter()
        .zip(&psi_sorted)
        .map(|(e, p)| (e - p).abs())
        .collect();
    let max_abs_deviation = deviations.iter().copied().fold(0.0, f64::max);
    let mean_abs_deviation = if deviations.is_empty() {
        0.0
    } else {
        deviations.iter().sum::<f64>() / deviations.len() as f64
    };
    Ok(SymbolComparison {
        eig_sorted,
        psi_sorted,
        deviations,
        max_abs_deviation,
        mean_abs_deviation,
    })
}

/// Node counts whose psi sample matches the operator order: the sample has
/// two branches, so the node product must be half the pixel count (one
/// even extent is halved).
pub fn psi_nodes_for(shape: (usize, usize)) -> Result<Vec<usize>> {
    let (n1, n2) = shape;
    let total = n1 * n2;
    if n1 == 1 {
        if n2 % 2 == 0 {
            return Ok(vec![n2 / 2]);
        }
    } else if n2 % 2 == 0 {
        return Ok(vec![n1, n2 / 2]);
    } else if n1 % 2 == 0 {
        return Ok(vec![n1 / 2, n2]);
    }
    Err(Error::SampleSizeMismatch {
        eigenvalues: total,
        samples: 2 * (total / 2),
    })
}

/// Deterministic fingerprint used when the eigensolver gives up.
fn matrix_hash(m: &DMatrix<f64>) -> String {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    m.nrows().hash(&mut h);
    m.ncols().hash(&mut h);
    for v in m.iter() {
        v.to_bits().hash(&mut h);
    }
    format!("{:016x}", h.finish())
}

/// Cheap upper bound on the spectral norm: `sqrt(||A||_1 ||A||_inf)`.
fn spectral_norm_estimate(m: &DMatrix<f64>) -> f64 {
    let mut col_max = 0.0_f64;
    for col in m.column_iter() {
        col_max = col_max.max(col.iter().map(|v| v.abs()).sum());
    }
    let mut row_max = 0.0_f64;
    for row in m.row_iter() {
        row_max = row_max.max(row.iter().map(|v| v.abs()).sum());
    }
    (col_max * row_max).sqrt()
}
