use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the toolkit.
///
/// Variants carry enough context to report the offending quantity without
/// re-deriving it at the call site.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// PSF text or coefficient array violates a structural rule.
    #[error("malformed PSF: {0}")]
    MalformedPsf(String),

    /// PSF token failed to parse as a real number.
    #[error("cannot parse PSF coefficient {token:?}")]
    PsfParse { token: String },

    /// PSF coefficient sum is (numerically) zero; normalization undefined.
    #[error("degenerate PSF: coefficient sum is zero")]
    DegeneratePsf,

    /// Crop half-width exceeds what the PSF holds.
    #[error("invalid crop: requested half-width {requested} exceeds available {available}")]
    InvalidCrop { requested: usize, available: usize },

    /// Pad width reaches past the opposite image edge.
    #[error("pad too wide: half-width {half} needs extent > {half}, image extent is {extent}")]
    PadTooWide { half: usize, extent: usize },

    /// Image extent too small for the kernel support (extent < 2m+1).
    #[error("image extent {extent} is below the minimum 2m+1 = {required} for this PSF")]
    ShapeTooSmall { extent: usize, required: usize },

    /// Operand shapes disagree.
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    /// Dense assembly refused: matrix order above the configured cap.
    #[error("size cap exceeded: dense order {size} is above the cap {cap}")]
    SizeCapExceeded { size: usize, cap: usize },

    /// Noise level must be nonnegative.
    #[error("invalid noise level {gamma}")]
    InvalidNoise { gamma: f64 },

    /// Relative restoration error against an all-zero reference.
    #[error("relative error undefined: reference image has zero norm")]
    UndefinedRre,

    /// PGM stream violates the P2/P5 grammar.
    #[error("PGM format error: {0}")]
    PgmFormat(String),

    /// Schatten order below one is not a norm.
    #[error("invalid Schatten order {p}: need p >= 1")]
    InvalidSchattenOrder { p: f64 },

    /// Eigenvalue count and reference-sample count must match to compare.
    #[error("sample size mismatch: {eigenvalues} eigenvalues vs {samples} reference samples")]
    SampleSizeMismatch { eigenvalues: usize, samples: usize },

    /// Cluster set has no points to measure distance against.
    #[error("invalid cluster set: empty point set")]
    InvalidClusterSet,

    /// Symmetry probe found a significant asymmetry.
    #[error("operator is not symmetric: relative deviation {deviation:.3e}")]
    NotSymmetric { deviation: f64 },

    /// Non-finite value produced where a finite one is required.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Dense eigensolver did not converge.
    #[error("eigensolver failed to converge on matrix {matrix_hash}")]
    EigensolverFailure { matrix_hash: String },
}
