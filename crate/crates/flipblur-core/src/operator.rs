//! Minimal linear-operator abstraction the Krylov solvers consume.

use nalgebra::DMatrix;

/// A real square operator applied matrix-free.
///
/// `apply` must treat `x` and `y` as length-`dim` slices; implementations
/// may assume that and callers must guarantee it.
pub trait LinearOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Dense matrix as an operator.
pub struct DenseOp<'a>(pub &'a DMatrix<f64>);

impl LinearOp for DenseOp<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.0.nrows();
        y.fill(0.0);
        // column-major traversal
        for (j, col) in self.0.column_iter().enumerate() {
            let xj = x[j];
            if xj != 0.0 {
                for i in 0..n {
                    y[i] += col[i] * xj;
                }
            }
        }
    }
}

/// Closure-backed operator for tests and composition.
pub struct FnOp<F: Fn(&[f64], &mut [f64])> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> LinearOp for FnOp<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}
