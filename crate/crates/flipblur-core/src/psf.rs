//! Point spread functions and their generating symbol.
//!
//! A PSF is a finite real coefficient array `h_j` with `j` in `[-m, m]` (1D)
//! or `(j1, j2)` in `[-m, m]^2` (2D), normalized so the coefficients sum to
//! one. Its symbol is the trigonometric polynomial
//! `f(theta) = sum_j h_j exp(i j . theta)`; the eigenvalue distribution of
//! the flipped blur operators is described by the two-branch rearrangement
//! `psi = +/- |f|`, which [`Psf::sample_psi`] samples on uniform grids.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub type SymbolValue = nalgebra::Complex<f64>;

/// Coefficient sums within this distance of one are accepted as normalized;
/// anything else (except zero) is rescaled and flagged.
pub const NORMALIZE_TOL: f64 = 1e-12;

/// Coefficient sums at or below this magnitude cannot be normalized.
const DEGENERATE_TOL: f64 = 1e-12;

/// A normalized blur kernel with odd square support.
///
/// Stored row-major; grid row `r` holds first-index offset `j1 = r - m1` and
/// column `c` holds second-index offset `j2 = c - m2`. 1D kernels are a
/// single row (`m1 = 0`), matching the `1 x n` layout of 1D signals.
#[derive(Debug, Clone)]
pub struct Psf {
    grid: Vec<f64>,
    half: (usize, usize),
    dims: u8,
    was_normalized: bool,
}

impl Psf {
    /// Parses the plain-text format: one row per line, whitespace-separated
    /// real coefficients, odd extent per dimension, 2D kernels square.
    /// Blank lines and lines starting with `#` are skipped.
    ///
    /// A coefficient sum off one by more than [`NORMALIZE_TOL`] is rescaled
    /// and reported through [`Psf::was_normalized`]; a zero sum is an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut row = Vec::new();
            for token in line.split_whitespace() {
                let value: f64 = token.parse().map_err(|_| Error::PsfParse {
                    token: token.to_string(),
                })?;
                row.push(value);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::MalformedPsf("no coefficients".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::MalformedPsf("ragged rows".into()));
        }
        let grid: Vec<f64> = rows.into_iter().flatten().collect();
        let height = grid.len() / cols;
        // a single text row always reads as a 1D kernel
        let dims = if height == 1 { 1 } else { 2 };
        Self::from_grid(height, cols, grid, dims)
    }

    /// Builds a 1D kernel from coefficients `h_{-m} .. h_m` (odd length).
    pub fn from_coeffs_1d(coeffs: &[f64]) -> Result<Self> {
        Self::from_grid(1, coeffs.len(), coeffs.to_vec(), 1)
    }

    /// Builds a 2D kernel from a row-major `side x side` array (odd side).
    pub fn from_grid_2d(side: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != side * side {
            return Err(Error::MalformedPsf(format!(
                "expected {} coefficients for side {side}, got {}",
                side * side,
                data.len()
            )));
        }
        Self::from_grid(side, side, data, 2)
    }

    fn from_grid(rows: usize, cols: usize, mut grid: Vec<f64>, dims: u8) -> Result<Self> {
        if cols % 2 == 0 || rows % 2 == 0 {
            return Err(Error::MalformedPsf(format!(
                "extent must be odd per dimension, got {rows} x {cols}"
            )));
        }
        if dims == 1 && rows != 1 {
            return Err(Error::MalformedPsf(format!(
                "1D kernel must be a single row, got {rows}"
            )));
        }
        if dims == 2 && rows != cols {
            return Err(Error::MalformedPsf(format!(
                "2D kernel must be square, got {rows} x {cols}"
            )));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedPsf("non-finite coefficient".into()));
        }
        let sum: f64 = grid.iter().sum();
        if sum.abs() <= DEGENERATE_TOL {
            return Err(Error::DegeneratePsf);
        }
        let was_normalized = (sum - 1.0).abs() > NORMALIZE_TOL;
        if was_normalized {
            for v in &mut grid {
                *v /= sum;
            }
        }
        Ok(Self {
            grid,
            half: ((rows - 1) / 2, (cols - 1) / 2),
            dims,
            was_normalized,
        })
    }

    /// The identity kernel (single centered 1).
    pub fn identity(dims: u8) -> Self {
        assert!(dims == 1 || dims == 2, "dims must be 1 or 2");
        Self::from_grid(1, 1, vec![1.0], dims).expect("identity kernel is valid")
    }

    /// Truncated Gaussian, centrosymmetric: `h_j ~ exp(-|j|^2 / (2 sigma^2))`.
    pub fn gaussian(half: usize, sigma: f64, dims: u8) -> Result<Self> {
        assert!(dims == 1 || dims == 2, "dims must be 1 or 2");
        assert!(sigma > 0.0, "sigma must be positive");
        let side = 2 * half + 1;
        let weight = |j: f64| (-j * j / (2.0 * sigma * sigma)).exp();
        match dims {
            1 => {
                let coeffs: Vec<f64> = (0..side).map(|c| weight(c as f64 - half as f64)).collect();
                Self::from_coeffs_1d(&coeffs)
            }
            _ => {
                let mut grid = Vec::with_capacity(side * side);
                for r in 0..side {
                    for c in 0..side {
                        let j1 = r as f64 - half as f64;
                        let j2 = c as f64 - half as f64;
                        grid.push(weight(j1) * weight(j2));
                    }
                }
                Self::from_grid_2d(side, grid)
            }
        }
    }

    /// Motion-like 2D kernel: two one-sided streaks leaving the center in
    /// different directions. Deliberately far from centrosymmetric.
    pub fn motion(half: usize) -> Result<Self> {
        assert!(half >= 1, "motion kernel needs half >= 1");
        let side = 2 * half + 1;
        let mut grid = vec![0.0; side * side];
        // (angle degrees, length fraction of half, weight); one-sided on purpose
        let streaks = [(25.0_f64, 1.0, 1.0), (115.0_f64, 0.6, 0.55)];
        let steps = 8 * half;
        for &(deg, lenfrac, w) in &streaks {
            let (s, c) = deg.to_radians().sin_cos();
            let len = lenfrac * half as f64 * 0.98;
            for t in 0..=steps {
                let d = len * t as f64 / steps as f64;
                splat_bilinear(&mut grid, side, d * s + half as f64, d * c + half as f64, w);
            }
        }
        Self::from_grid_2d(side, grid)
    }

    /// Speckle-like 2D kernel: positive seeded grain under a radial
    /// envelope. Nonsymmetric for every seed in practice.
    pub fn speckle(half: usize, seed: u64) -> Result<Self> {
        assert!(half >= 1, "speckle kernel needs half >= 1");
        let side = 2 * half + 1;
        let mut rng = SplitMix64::new(seed);
        let mut grid = Vec::with_capacity(side * side);
        for r in 0..side {
            for c in 0..side {
                let j1 = r as f64 - half as f64;
                let j2 = c as f64 - half as f64;
                let r2 = (j1 * j1 + j2 * j2) / (half as f64 * half as f64);
                let u = rng.next_f64();
                grid.push((-1.8 * r2).exp() * (0.15 + u * u));
            }
        }
        Self::from_grid_2d(side, grid)
    }

    /// Keeps the centered window of half-width `m_new` and renormalizes.
    pub fn crop(&self, m_new: usize) -> Result<Self> {
        let m = self.m();
        if m_new > m {
            return Err(Error::InvalidCrop {
                requested: m_new,
                available: m,
            });
        }
        let (rows, cols) = self.extent();
        let (keep_rows, keep_cols) = match self.dims {
            1 => (0..1, (self.half.1 - m_new)..(self.half.1 + m_new + 1)),
            _ => (
                (self.half.0 - m_new)..(self.half.0 + m_new + 1),
                (self.half.1 - m_new)..(self.half.1 + m_new + 1),
            ),
        };
        let mut grid = Vec::with_capacity(keep_rows.len() * keep_cols.len());
        for r in keep_rows.clone() {
            for c in keep_cols.clone() {
                grid.push(self.grid[r * cols + c]);
            }
        }
        debug_assert!(keep_rows.len() <= rows && keep_cols.len() <= cols);
        Self::from_grid(keep_rows.len(), keep_cols.len(), grid, self.dims)
    }

    /// 1 or 2.
    pub fn dims(&self) -> u8 {
        self.dims
    }

    /// Per-dimension half-width `(m1, m2)`; `m1 = 0` for 1D kernels.
    pub fn half(&self) -> (usize, usize) {
        self.half
    }

    /// The half-width `m` (equal in both dimensions for 2D kernels).
    pub fn m(&self) -> usize {
        self.half.0.max(self.half.1)
    }

    /// Grid extent `(rows, cols)`.
    pub fn extent(&self) -> (usize, usize) {
        (2 * self.half.0 + 1, 2 * self.half.1 + 1)
    }

    /// Row-major coefficient storage.
    pub fn coeffs(&self) -> &[f64] {
        &self.grid
    }

    /// Coefficient at offsets `(j1, j2)`; zero outside the support.
    pub fn coeff(&self, j1: isize, j2: isize) -> f64 {
        let (m1, m2) = (self.half.0 as isize, self.half.1 as isize);
        if j1 < -m1 || j1 > m1 || j2 < -m2 || j2 > m2 {
            return 0.0;
        }
        let cols = 2 * self.half.1 + 1;
        self.grid[((j1 + m1) as usize) * cols + (j2 + m2) as usize]
    }

    /// Whether construction had to rescale the coefficients to sum to one.
    pub fn was_normalized(&self) -> bool {
        self.was_normalized
    }

    /// Serializes back to the plain-text format ([`Psf::parse`] inverse).
    pub fn to_text(&self) -> String {
        let (_, cols) = self.extent();
        let mut out = String::new();
        for row in self.grid.chunks(cols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Evaluates the symbol `f(theta) = sum_j h_j exp(i j . theta)`.
    ///
    /// `theta` must hold one angle per dimension.
    pub fn eval_symbol(&self, theta: &[f64]) -> Result<SymbolValue> {
        if theta.len() != self.dims as usize {
            return Err(Error::DimensionMismatch {
                expected: (1, self.dims as usize),
                got: (1, theta.len()),
            });
        }
        let (t1, t2) = match self.dims {
            1 => (0.0, theta[0]),
            _ => (theta[0], theta[1]),
        };
        let (m1, m2) = (self.half.0 as isize, self.half.1 as isize);
        let mut acc = SymbolValue::new(0.0, 0.0);
        for j1 in -m1..=m1 {
            for j2 in -m2..=m2 {
                let h = self.coeff(j1, j2);
                if h != 0.0 {
                    let phase = j1 as f64 * t1 + j2 as f64 * t2;
                    acc += SymbolValue::new(phase.cos(), phase.sin()).scale(h);
                }
            }
        }
        Ok(acc)
    }

    /// `|f|` sampled on the uniform grid `theta_k = 2 pi k / nodes` per
    /// dimension (`k = 0 .. nodes-1`), returned sorted ascending.
    pub fn sample_abs_symbol(&self, nodes: &[usize]) -> Result<Vec<f64>> {
        let total = self.check_nodes(nodes)?;
        let mut out = Vec::with_capacity(total);
        self.for_each_abs_sample(nodes, |v| out.push(v));
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    /// Samples the two-branch rearrangement `psi = +/- |f|`: each grid
    /// sample contributes one positive and one negated copy.
    pub fn sample_psi(&self, nodes: &[usize]) -> Result<PsiSample> {
        let total = self.check_nodes(nodes)?;
        let mut values = Vec::with_capacity(2 * total);
        self.for_each_abs_sample(nodes, |v| {
            values.push(v);
            values.push(-v);
        });
        values.sort_by(f64::total_cmp);
        Ok(PsiSample {
            values,
            nodes: nodes.to_vec(),
        })
    }

    /// Maximum of `|f|` over a dense uniform grid (`nodes_per_dim` per
    /// dimension); used to bound the range of `psi`.
    pub fn max_abs_symbol(&self, nodes_per_dim: usize) -> f64 {
        assert!(nodes_per_dim >= 1);
        let nodes = match self.dims {
            1 => vec![nodes_per_dim],
            _ => vec![nodes_per_dim, nodes_per_dim],
        };
        let mut max = 0.0_f64;
        self.for_each_abs_sample(&nodes, |v| max = max.max(v));
        max
    }

    fn check_nodes(&self, nodes: &[usize]) -> Result<usize> {
        if nodes.len() != self.dims as usize {
            return Err(Error::DimensionMismatch {
                expected: (1, self.dims as usize),
                got: (1, nodes.len()),
            });
        }
        if nodes.iter().any(|&n| n == 0) {
            return Err(Error::MalformedPsf("zero sample nodes".into()));
        }
        Ok(nodes.iter().product())
    }

    /// Streams `|f(theta_k)|` over the product grid without materializing
    /// it. 2D evaluation folds the inner dimension first, so cost is
    /// `O(nodes^2 * m)` instead of `O(nodes^2 * m^2)`.
    fn for_each_abs_sample(&self, nodes: &[usize], mut visit: impl FnMut(f64)) {
        let tau = 2.0 * std::f64::consts::PI;
        if self.dims == 1 {
            let n = nodes[0];
            for k in 0..n {
                let theta = tau * k as f64 / n as f64;
                let v = self
                    .eval_symbol(&[theta])
                    .expect("1D symbol evaluation cannot fail");
                visit(v.norm());
            }
            return;
        }
        let (n1, n2) = (nodes[0], nodes[1]);
        let m1 = self.half.0 as isize;
        // inner[(j1 + m1) * n2 + k2] = sum_j2 h_{j1,j2} exp(i j2 theta2)
        let rows = 2 * self.half.0 + 1;
        let mut inner = vec![SymbolValue::new(0.0, 0.0); rows * n2];
        for (r, slot) in inner.chunks_mut(n2).enumerate() {
            let j1 = r as isize - m1;
            for (k2, value) in slot.iter_mut().enumerate() {
                let theta2 = tau * k2 as f64 / n2 as f64;
                let m2 = self.half.1 as isize;
                let mut acc = SymbolValue::new(0.0, 0.0);
                for j2 in -m2..=m2 {
                    let h = self.coeff(j1, j2);
                    if h != 0.0 {
                        let phase = j2 as f64 * theta2;
                        acc += SymbolValue::new(phase.cos(), phase.sin()).scale(h);
                    }
                }
                *value = acc;
            }
        }
        for k1 in 0..n1 {
            let theta1 = tau * k1 as f64 / n1 as f64;
            let phases: Vec<SymbolValue> = (-m1..=m1)
                .map(|j1| {
                    let phase = j1 as f64 * theta1;
                    SymbolValue::new(phase.cos(), phase.sin())
                })
                .collect();
            for k2 in 0..n2 {
                let mut acc = SymbolValue::new(0.0, 0.0);
                for (r, phase) in phases.iter().enumerate() {
                    acc += phase * inner[r * n2 + k2];
                }
                visit(acc.norm());
            }
        }
    }
}

/// Bilinear deposit of weight `w` at fractional grid position `(y, x)`.
fn splat_bilinear(grid: &mut [f64], side: usize, y: f64, x: f64, w: f64) {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as isize, x0 as isize);
    for (dy, dx, frac) in [
        (0, 0, (1.0 - fy) * (1.0 - fx)),
        (0, 1, (1.0 - fy) * fx),
        (1, 0, fy * (1.0 - fx)),
        (1, 1, fy * fx),
    ] {
        let (yy, xx) = (y0 + dy, x0 + dx);
        if yy >= 0 && xx >= 0 && (yy as usize) < side && (xx as usize) < side && frac > 0.0 {
            grid[yy as usize * side + xx as usize] += w * frac;
        }
    }
}

/// Sorted sample of the two-branch symbol rearrangement `+/- |f|`.
///
/// Symmetric under negation by construction; always of even length
/// (twice the product of the node counts).
#[derive(Debug, Clone)]
pub struct PsiSample {
    values: Vec<f64>,
    nodes: Vec<usize>,
}

impl PsiSample {
    /// Samples sorted ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-dimension node counts the sample was drawn on.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
