//! Boundary conditions, blur operators, dense assembly, and the flip.
//!
//! A blur couples frame pixels with scene content outside the frame, so a
//! square linear model must invent the exterior. Each [`BcKind`] is one
//! rule for doing that; the resulting operator is Toeplitz (zero), à la
//! circulant (periodic), Toeplitz-plus-Hankel (reflective), or
//! Toeplitz-plus-structured-low-rank (anti-reflective).
//!
//! The flip reverses the row order of the operator. For zero and periodic
//! boundaries the flipped matrix is exactly symmetric whatever the kernel;
//! for the other boundaries it is symmetric up to a low-rank correction.
//! That is what lets symmetric Krylov methods and eigenvalue (rather than
//! singular value) analysis apply to nonsymmetric kernels.

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::operator::LinearOp;
use crate::psf::Psf;
use nalgebra::DMatrix;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Dense assembly refuses above this order unless the caller raises the cap.
pub const DEFAULT_DENSE_CAP: usize = 16384;

/// How the blur model fills in pixels outside the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcKind {
    /// Exterior is black: `f_{1-i} = 0`.
    Zero,
    /// Scene tiles: `f_{1-i} = f_{n+1-i}`.
    Periodic,
    /// Scene mirrors across the edge: `f_{1-i} = f_i`.
    Reflective,
    /// Scene continues anti-symmetrically about the edge pixel:
    /// `f_{1-i} = 2 f_1 - f_{i+1}`; preserves linear trends across the
    /// boundary.
    AntiReflective,
}

impl BcKind {
    pub const ALL: [BcKind; 4] = [
        BcKind::Zero,
        BcKind::Periodic,
        BcKind::Reflective,
        BcKind::AntiReflective,
    ];
}

impl std::str::FromStr for BcKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zero" => Ok(Self::Zero),
            "periodic" => Ok(Self::Periodic),
            "reflective" => Ok(Self::Reflective),
            "antireflective" => Ok(Self::AntiReflective),
            other => Err(format!(
                "unknown boundary condition {other:?} (zero|periodic|reflective|antireflective)"
            )),
        }
    }
}

impl std::fmt::Display for BcKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::Periodic => "periodic",
            Self::Reflective => "reflective",
            Self::AntiReflective => "antireflective",
        })
    }
}

/// Pads `img` by `half = (m1, m2)` on each side under the boundary rule.
///
/// Padding is applied one dimension at a time (rows, then columns), with
/// the 1D rule applied to every line of the intermediate image. Running
/// the second pass over the already-padded lines is exactly what produces
/// the 2D corner values, e.g. the anti-reflective corner
/// `f_{1-i,1-j} = 4 f_{1,1} - 2 f_{1,j+1} - 2 f_{i+1,1} + f_{i+1,j+1}`.
pub fn extend(img: &Image, half: (usize, usize), bc: BcKind) -> Result<Image> {
    let rows_done = pad_dim(img, half.0, bc, Axis::Rows)?;
    pad_dim(&rows_done, half.1, bc, Axis::Cols)
}

#[derive(Clone, Copy)]
enum Axis {
    Rows,
    Cols,
}

fn pad_dim(img: &Image, m: usize, bc: BcKind, axis: Axis) -> Result<Image> {
    if m == 0 {
        return Ok(img.clone());
    }
    let extent = match axis {
        Axis::Rows => img.rows(),
        Axis::Cols => img.cols(),
    };
    if m >= extent {
        return Err(Error::PadTooWide { half: m, extent });
    }
    // line(k, i): element i of interior line k along the padded axis
    let n = extent;
    let (out_shape, lines, line_len) = match axis {
        Axis::Rows => ((img.rows() + 2 * m, img.cols()), img.cols(), img.rows()),
        Axis::Cols => ((img.rows(), img.cols() + 2 * m), img.rows(), img.cols()),
    };
    debug_assert_eq!(line_len, n);
    let mut out = Image::zeros(out_shape);
    for l in 0..lines {
        let get = |i: usize| -> f64 {
            match axis {
                Axis::Rows => img.at(i, l),
                Axis::Cols => img.at(l, i),
            }
        };
        let mut put = |i: usize, v: f64| match axis {
            Axis::Rows => out.set(i, l, v),
            Axis::Cols => out.set(l, i, v),
        };
        for i in 0..n {
            put(m + i, get(i));
        }
        for i in 1..=m {
            // 1-based exterior indices 1-i (leading) and n+i (trailing)
            let (lead, trail) = match bc {
                BcKind::Zero => (0.0, 0.0),
                BcKind::Periodic => (get(n - i), get(i - 1)),
                BcKind::Reflective => (get(i - 1), get(n - i)),
                BcKind::AntiReflective => {
                    (2.0 * get(0) - get(i), 2.0 * get(n - 1) - get(n - 1 - i))
                }
            };
            put(m - i, lead);
            put(m + n - 1 + i, trail);
        }
    }
    Ok(out)
}

/// A blur under one boundary condition on a fixed image shape.
///
/// Application is matrix-free (pad, then correlate); the dense matrix is
/// only assembled on request for spectral work.
#[derive(Debug, Clone)]
pub struct BlurOperator {
    psf: Psf,
    bc: BcKind,
    shape: (usize, usize),
}

impl BlurOperator {
    /// Requires 1D kernels on `(1, n)` signals and per-dimension extent at
    /// least `2m + 1`, so the kernel support never straddles both edges.
    pub fn new(psf: Psf, bc: BcKind, shape: (usize, usize)) -> Result<Self> {
        if psf.dims() == 1 && shape.0 != 1 {
            return Err(Error::DimensionMismatch {
                expected: (1, shape.1),
                got: shape,
            });
        }
        let (m1, m2) = psf.half();
        for (extent, m) in [(shape.0, m1), (shape.1, m2)] {
            if extent < 2 * m + 1 {
                return Err(Error::ShapeTooSmall {
                    extent,
                    required: 2 * m + 1,
                });
            }
        }
        Ok(Self { psf, bc, shape })
    }

    pub fn psf(&self) -> &Psf {
        &self.psf
    }

    pub fn bc(&self) -> BcKind {
        self.bc
    }

    /// Image shape `(n1, n2)` the operator acts on.
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// Order of the operator as a matrix (`n1 * n2`).
    pub fn n(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    /// Blurs `img`: pad by the boundary rule, then correlate with the
    /// kernel (`g_i = sum_k h_k f_{i-k}` on the padded field).
    pub fn apply(&self, img: &Image) -> Result<Image> {
        if img.shape() != self.shape {
            return Err(Error::DimensionMismatch {
                expected: self.shape,
                got: img.shape(),
            });
        }
        let padded = extend(img, self.psf.half(), self.bc)?;
        Ok(self.correlate(&padded))
    }

    fn correlate(&self, padded: &Image) -> Image {
        let (m1, m2) = self.psf.half();
        let (n1, n2) = self.shape;
        let pcols = padded.cols();
        let mut out = vec![0.0; n1 * n2];
        for k1 in -(m1 as isize)..=(m1 as isize) {
            for k2 in -(m2 as isize)..=(m2 as isize) {
                let h = self.psf.coeff(k1, k2);
                if h == 0.0 {
                    continue;
                }
                for i1 in 0..n1 {
                    let prow = (i1 as isize + m1 as isize - k1) as usize;
                    let pbase = prow * pcols + (m2 as isize - k2) as usize;
                    let pline = &padded.data()[pbase..pbase + n2];
                    let oline = &mut out[i1 * n2..(i1 + 1) * n2];
                    for (o, p) in oline.iter_mut().zip(pline) {
                        *o += h * p;
                    }
                }
            }
        }
        Image::new((n1, n2), out).expect("correlation preserves shape")
    }

    /// Dense matrix of the operator under [`DEFAULT_DENSE_CAP`].
    pub fn assemble_dense(&self) -> Result<DMatrix<f64>> {
        self.assemble_dense_capped(DEFAULT_DENSE_CAP)
    }

    /// Dense matrix, refusing orders above `cap`. Column `j` is the
    /// operator applied to the `j`-th unit vector, so this stays in exact
    /// agreement with `apply` by construction.
    pub fn assemble_dense_capped(&self, cap: usize) -> Result<DMatrix<f64>> {
        let n = self.n();
        if n > cap {
            return Err(Error::SizeCapExceeded { size: n, cap });
        }
        let mut mat = DMatrix::zeros(n, n);
        let fill = |(j, col): (usize, &mut [f64])| {
            let mut e = Image::zeros(self.shape);
            e.data_mut()[j] = 1.0;
            let applied = self.apply(&e).expect("unit vector has operator shape");
            col.copy_from_slice(applied.data());
        };
        #[cfg(feature = "parallel")]
        mat.as_mut_slice().par_chunks_mut(n).enumerate().for_each(fill);
        #[cfg(not(feature = "parallel"))]
        mat.as_mut_slice().chunks_mut(n).enumerate().for_each(fill);
        Ok(mat)
    }

    /// Dense matrix of the same kernel under the zero boundary: the
    /// (multilevel) Toeplitz part shared by all boundary conditions.
    pub fn toeplitz_part(&self, cap: usize) -> Result<DMatrix<f64>> {
        BlurOperator::new(self.psf.clone(), BcKind::Zero, self.shape)?.assemble_dense_capped(cap)
    }

    /// The flip-preconditioned view of this operator.
    pub fn flipped(&self) -> FlippedBlur<'_> {
        FlippedBlur(self)
    }
}

impl LinearOp for BlurOperator {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let img = Image::new(self.shape, x.to_vec()).expect("dim contract");
        let out = BlurOperator::apply(self, &img).expect("shape matches");
        y.copy_from_slice(out.data());
    }
}

/// The operator with rows in reversed order (left-multiplied by the
/// anti-identity; in 2D the per-axis anti-identities tensored, which on
/// row-major storage is a full reversal of the pixel vector).
pub struct FlippedBlur<'a>(pub &'a BlurOperator);

impl LinearOp for FlippedBlur<'_> {
    fn dim(&self) -> usize {
        self.0.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        LinearOp::apply(self.0, x, y);
        y.reverse();
    }
}

/// Blur then flip: the right-hand side transform matching [`FlippedBlur`].
pub fn flip_apply(op: &BlurOperator, img: &Image) -> Result<Image> {
    Ok(flip_image(&op.apply(img)?))
}

/// Reverses the pixel vector (both axes at once).
pub fn flip_image(img: &Image) -> Image {
    let mut data = img.data().to_vec();
    data.reverse();
    Image::new(img.shape(), data).expect("same shape")
}

/// Dense flip: row order reversed.
pub fn flip_dense(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(r, c, |i, j| m[(r - 1 - i, j)])
}
