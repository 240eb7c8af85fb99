//! GMRES and MINRES restoration with discrepancy-principle stopping.
//!
//! Both solvers run the same projection loop: build an orthonormal Krylov
//! basis, maintain the QR factorization of the small Hessenberg system with
//! Givens rotations, and read the residual norm off the rotated right-hand
//! side for free. GMRES orthogonalizes each new direction against the whole
//! basis; MINRES against the last two vectors only (Lanczos), which is
//! exact when the operator is symmetric. On a symmetric operator the two
//! histories therefore coincide to rounding.
//!
//! Restoration problems are noisy and ill-posed, so plain convergence is
//! the wrong goal: iterates first approach the true scene, then fit noise
//! (semiconvergence). The solvers track the residual against a discrepancy
//! radius `tau * delta` and can snapshot both the discrepancy-stopped
//! iterate and, when the truth is supplied, the best iterate in hindsight.

use crate::error::{Error, Result};
use crate::operator::LinearOp;
use crate::rng::SplitMix64;

/// Discrepancy-principle stop: accept the first iterate with
/// `||r_k|| <= tau * delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    /// Noise-norm estimate, typically `gamma * ||A f||`.
    pub delta: f64,
    /// Safety factor, at least one.
    pub tau: f64,
}

/// When the iteration ends.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRule {
    /// Hard iteration budget (at least one).
    pub max_iter: usize,
    pub discrepancy: Option<Discrepancy>,
    /// Keep iterating after the discrepancy fires (the crossing iterate is
    /// still snapshotted); used to observe semiconvergence past the stop.
    pub continue_after_discrepancy: bool,
}

impl StoppingRule {
    /// Budget-only rule.
    pub fn max_iter(max_iter: usize) -> Self {
        Self {
            max_iter,
            discrepancy: None,
            continue_after_discrepancy: false,
        }
    }

    /// Budget plus discrepancy stop.
    pub fn with_discrepancy(max_iter: usize, delta: f64, tau: f64) -> Self {
        Self {
            max_iter,
            discrepancy: Some(Discrepancy { delta, tau }),
            continue_after_discrepancy: false,
        }
    }

    /// Record the discrepancy crossing but run out the budget anyway.
    pub fn keep_iterating(mut self) -> Self {
        self.continue_after_discrepancy = true;
        self
    }
}

/// Noise-norm estimate `delta = gamma * ||A f||` used by the discrepancy
/// principle.
pub fn discrepancy_delta(gamma: f64, blurred_norm: f64) -> f64 {
    gamma * blurred_norm
}

/// What ended the iteration loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The discrepancy stop fired (and the rule did not ask to continue).
    Discrepancy,
    /// Budget exhausted, or the Krylov space closed early (see
    /// [`IterationHistory::breakdown`]).
    MaxIter,
}

/// Krylov-space closure before the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakdownKind {
    /// Residual already negligible: the solution lives in the space built
    /// so far.
    Lucky,
    /// Space closed with a large residual (singular or defective system).
    Unlucky,
}

/// Per-iteration record of one solve.
#[derive(Debug, Clone)]
pub struct IterationHistory {
    /// `||r_k||` for `k = 0..=K`; `residual_norms[0] = ||b||`.
    /// Nonincreasing by construction.
    pub residual_norms: Vec<f64>,
    /// `||x_k - truth|| / ||truth||` aligned with `residual_norms`;
    /// present only when the truth was supplied.
    pub rre_per_iter: Option<Vec<f64>>,
    pub stopped_by: StopReason,
    /// First `k` with `||r_k|| <= tau * delta`, if it happened.
    pub discrepancy_iter: Option<usize>,
    /// `argmin` of `rre_per_iter`, if the truth was supplied.
    pub best_iter: Option<usize>,
    pub breakdown: Option<BreakdownKind>,
}

impl IterationHistory {
    /// CSV with columns `iter,residual_norm,rre`; the `rre` field is empty
    /// when no truth was supplied.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,residual_norm,rre\n");
        for (k, res) in self.residual_norms.iter().enumerate() {
            match &self.rre_per_iter {
                Some(rre) => out.push_str(&format!("{k},{res},{}\n", rre[k])),
                None => out.push_str(&format!("{k},{res},\n")),
            }
        }
        out
    }

    /// Number of iterations actually run.
    pub fn iterations(&self) -> usize {
        self.residual_norms.len() - 1
    }
}

/// Solution and bookkeeping of one solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Iterate where the loop ended.
    pub solution: Vec<f64>,
    pub history: IterationHistory,
    /// Iterate at the discrepancy crossing, if it fired.
    pub solution_at_discrepancy: Option<Vec<f64>>,
    /// Lowest-RRE iterate, if the truth was supplied.
    pub solution_at_best: Option<Vec<f64>>,
}

/// Full GMRES (unrestarted, zero initial guess, modified Gram-Schmidt).
pub fn gmres<O: LinearOp + ?Sized>(
    op: &O,
    b: &[f64],
    rule: &StoppingRule,
    truth: Option<&[f64]>,
) -> Result<SolveReport> {
    krylov_solve(op, b, rule, truth, true)
}

/// MINRES: the same projection with two-term (Lanczos) orthogonalization.
///
/// No symmetry check is performed; on a mildly nonsymmetric operator the
/// recurrence silently loses optimality, which is sometimes exactly what
/// an experiment wants to observe. Use [`minres_checked`] to refuse
/// nonsymmetric operators instead.
pub fn minres<O: LinearOp + ?Sized>(
    op: &O,
    b: &[f64],
    rule: &StoppingRule,
    truth: Option<&[f64]>,
) -> Result<SolveReport> {
    krylov_solve(op, b, rule, truth, false)
}

/// MINRES behind a randomized symmetry probe (`<Ax, y>` vs `<x, Ay>`).
pub fn minres_checked<O: LinearOp + ?Sized>(
    op: &O,
    b: &[f64],
    rule: &StoppingRule,
    truth: Option<&[f64]>,
) -> Result<SolveReport> {
    symmetry_probe(op, 1e-8)?;
    minres(op, b, rule, truth)
}

/// Measures `max |<Ax,y> - <x,Ay>| / (||Ax|| ||y||)` over a few fixed
/// random pairs; errors with [`Error::NotSymmetric`] above `rel_tol`.
pub fn symmetry_probe<O: LinearOp + ?Sized>(op: &O, rel_tol: f64) -> Result<f64> {
    let n = op.dim();
    let mut rng = SplitMix64::new(0x5EED_5EED);
    let mut worst = 0.0_f64;
    for _ in 0..3 {
        let x = gaussian(&mut rng, n);
        let y = gaussian(&mut rng, n);
        let mut ax = vec![0.0; n];
        let mut ay = vec![0.0; n];
        op.apply(&x, &mut ax);
        op.apply(&y, &mut ay);
        let scale = norm(&ax) * norm(&y);
        if scale == 0.0 {
            continue;
        }
        worst = worst.max((dot(&ax, &y) - dot(&x, &ay)).abs() / scale);
    }
    if worst > rel_tol {
        Err(Error::NotSymmetric { deviation: worst })
    } else {
        Ok(worst)
    }
}

const BREAKDOWN_REL_TOL: f64 = 1e-14;
const LUCKY_REL_TOL: f64 = 1e-10;

fn krylov_solve<O: LinearOp + ?Sized>(
    op: &O,
    b: &[f64],
    rule: &StoppingRule,
    truth: Option<&[f64]>,
    full_ortho: bool,
) -> Result<SolveReport> {
    let n = op.dim();
    assert_eq!(b.len(), n, "right-hand side length must match operator");
    assert!(rule.max_iter >= 1, "max_iter must be at least one");
    if let Some(d) = &rule.discrepancy {
        assert!(d.tau >= 1.0, "discrepancy safety factor must be >= 1");
        assert!(d.delta >= 0.0, "discrepancy radius must be nonnegative");
    }
    let truth_norm = match truth {
        Some(t) => {
            assert_eq!(t.len(), n, "truth length must match operator");
            let tn = norm(t);
            if tn == 0.0 {
                return Err(Error::UndefinedRre);
            }
            Some(tn)
        }
        None => None,
    };

    let beta = norm(b);
    if !beta.is_finite() {
        return Err(Error::NumericalFailure("non-finite right-hand side".into()));
    }

    let mut residual_norms = vec![beta];
    let mut rre_per_iter = truth_norm.map(|_| vec![1.0]);
    let mut best: Option<(usize, f64, Vec<f64>)> =
        truth_norm.map(|_| (0, 1.0, vec![0.0; n]));
    let mut discrepancy_iter = None;
    let mut solution_at_discrepancy = None;
    let mut stopped_by = StopReason::MaxIter;
    let mut breakdown = None;
    let mut solution = vec![0.0; n];

    let crossed = |r: f64| -> bool {
        rule.discrepancy
            .map(|d| r <= d.tau * d.delta)
            .unwrap_or(false)
    };

    let mut stop_now = false;
    if crossed(beta) {
        discrepancy_iter = Some(0);
        solution_at_discrepancy = Some(solution.clone());
        if !rule.continue_after_discrepancy {
            stopped_by = StopReason::Discrepancy;
            stop_now = true;
        }
    }
    if beta == 0.0 {
        // b = 0: the zero iterate is exact
        breakdown = Some(BreakdownKind::Lucky);
        stop_now = true;
    }

    if !stop_now {
        let mut basis: Vec<Vec<f64>> = vec![scaled(b, 1.0 / beta)];
        // QR of the Hessenberg system: rotated columns (upper triangular),
        // rotation pairs, rotated right-hand side
        let mut r_cols: Vec<Vec<f64>> = Vec::new();
        let mut rotations: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];

        for iter in 1..=rule.max_iter {
            let kk = basis.len() - 1;
            let mut w = vec![0.0; n];
            op.apply(&basis[kk], &mut w);
            let anorm = norm(&w);

            let mut hcol = vec![0.0; kk + 2];
            let lo = if full_ortho { 0 } else { kk.saturating_sub(1) };
            for j in lo..=kk {
                let hj = dot(&basis[j], &w);
                hcol[j] = hj;
                axpy(&mut w, -hj, &basis[j]);
            }
            let hnext = norm(&w);
            hcol[kk + 1] = hnext;
            if hcol.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalFailure(format!(
                    "non-finite Hessenberg entry at iteration {iter}"
                )));
            }

            for (j, &(c, s)) in rotations.iter().enumerate() {
                let (a, b2) = (hcol[j], hcol[j + 1]);
                hcol[j] = c * a + s * b2;
                hcol[j + 1] = -s * a + c * b2;
            }
            let (c, s, r) = make_givens(hcol[kk], hcol[kk + 1]);
            hcol[kk] = r;
            hcol.truncate(kk + 1);
            rotations.push((c, s));
            g.push(0.0);
            let (ga, gb) = (g[kk], g[kk + 1]);
            g[kk] = c * ga + s * gb;
            g[kk + 1] = -s * ga + c * gb;
            let residual = g[kk + 1].abs();
            r_cols.push(hcol);
            residual_norms.push(residual);

            solution = assemble_iterate(&r_cols, &g, &basis, n)?;
            if let (Some(rre), Some(tnorm), Some(t)) = (&mut rre_per_iter, truth_norm, truth)
            {
                let e = dist(&solution, t) / tnorm;
                rre.push(e);
                if let Some((_, best_e, _)) = &best {
                    if e < *best_e {
                        best = Some((iter, e, solution.clone()));
                    }
                }
            }

            if discrepancy_iter.is_none() && crossed(residual) {
                discrepancy_iter = Some(iter);
                solution_at_discrepancy = Some(solution.clone());
                if !rule.continue_after_discrepancy {
                    stopped_by = StopReason::Discrepancy;
                    break;
                }
            }

            if hnext <= BREAKDOWN_REL_TOL * anorm.max(f64::MIN_POSITIVE) {
                breakdown = Some(if residual <= LUCKY_REL_TOL * beta {
                    BreakdownKind::Lucky
                } else {
                    BreakdownKind::Unlucky
                });
                break;
            }
            basis.push(scaled(&w, 1.0 / hnext));
        }
    }

    let (best_iter, solution_at_best) = match best {
        Some((k, _, x)) => (Some(k), Some(x)),
        None => (None, None),
    };
    Ok(SolveReport {
        solution,
        history: IterationHistory {
            residual_norms,
            rre_per_iter,
            stopped_by,
            discrepancy_iter,
            best_iter,
            breakdown,
        },
        solution_at_discrepancy,
        solution_at_best,
    })
}

/// Minimizer of the projected least-squares system: back-substitute
/// `R y = g`, then expand `x = V y`.
fn assemble_iterate(
    r_cols: &[Vec<f64>],
    g: &[f64],
    basis: &[Vec<f64>],
    n: usize,
) -> Result<Vec<f64>> {
    let k = r_cols.len();
    let mut y = g[..k].to_vec();
    for l in (0..k).rev() {
        let diag = r_cols[l][l];
        if diag == 0.0 {
            return Err(Error::NumericalFailure(
                "singular projected system".into(),
            ));
        }
        y[l] /= diag;
        let yl = y[l];
        for i in 0..l {
            y[i] -= r_cols[l][i] * yl;
        }
    }
    let mut x = vec![0.0; n];
    for (j, yj) in y.iter().enumerate() {
        axpy(&mut x, *yj, &basis[j]);
    }
    Ok(x)
}

fn make_givens(a: f64, b: f64) -> (f64, f64, f64) {
    let r = a.hypot(b);
    if r == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / r, b / r, r)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scaled(x: &[f64], alpha: f64) -> Vec<f64> {
    x.iter().map(|v| v * alpha).collect()
}

fn gaussian(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (a, b) = rng.next_gaussian_pair();
        out.push(a);
        if out.len() < n {
            out.push(b);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{DenseOp, FnOp};
    use nalgebra::DMatrix;

    fn diag_op(d: Vec<f64>) -> FnOp<impl Fn(&[f64], &mut [f64])> {
        let n = d.len();
        FnOp {
            dim: n,
            f: move |x: &[f64], y: &mut [f64]| {
                for i in 0..n {
                    y[i] = d[i] * x[i];
                }
            },
        }
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let op = diag_op(vec![1.0; 5]);
        let b = [1.0, -2.0, 3.0, 0.5, 0.0];
        let report = gmres(&op, &b, &StoppingRule::max_iter(10), None).unwrap();
        assert!(report.history.residual_norms[1] < 1e-13);
        assert_eq!(report.history.breakdown, Some(BreakdownKind::Lucky));
        for (x, want) in report.solution.iter().zip(b) {
            assert!((x - want).abs() < 1e-13);
        }
    }

    #[test]
    fn diagonal_system_solves_exactly() {
        let op = diag_op(vec![1.0, 2.0, 3.0]);
        let b = [1.0, 1.0, 1.0];
        let report = gmres(&op, &b, &StoppingRule::max_iter(10), None).unwrap();
        let want = [1.0, 0.5, 1.0 / 3.0];
        for (x, w) in report.solution.iter().zip(want) {
            assert!((x - w).abs() < 1e-12);
        }
        assert!(*report.history.residual_norms.last().unwrap() < 1e-12);
    }

    #[test]
    fn minres_handles_symmetric_indefinite() {
        let op = diag_op(vec![2.0, -1.0, 0.5, -3.0]);
        let b = [1.0, 2.0, -1.0, 0.5];
        let report = minres(&op, &b, &StoppingRule::max_iter(10), None).unwrap();
        let want = [0.5, -2.0, -2.0, -0.5 / 3.0];
        for (x, w) in report.solution.iter().zip(want) {
            assert!((x - w).abs() < 1e-11);
        }
    }

    #[test]
    fn gmres_terminates_on_well_conditioned_random_systems() {
        for n in [10usize, 30, 50] {
            let mut rng = SplitMix64::new(n as u64);
            let mut m = DMatrix::from_fn(n, n, |_, _| 0.3 * rng.next_f64() / n as f64);
            for i in 0..n {
                m[(i, i)] += 1.0;
            }
            let op = DenseOp(&m);
            let b = gaussian(&mut rng, n);
            let report = gmres(&op, &b, &StoppingRule::max_iter(n), None).unwrap();
            let beta = norm(&b);
            assert!(
                *report.history.residual_norms.last().unwrap() <= 1e-10 * beta,
                "n = {n}"
            );
        }
    }

    #[test]
    fn residual_history_is_nonincreasing() {
        let mut rng = SplitMix64::new(7);
        let n = 24;
        let m = DMatrix::from_fn(n, n, |i, j| {
            rng.next_f64() * 0.2 + if i == j { 1.0 } else { 0.0 }
        });
        let op = DenseOp(&m);
        let b = gaussian(&mut rng, n);
        let report = gmres(&op, &b, &StoppingRule::max_iter(n), None).unwrap();
        let r = &report.history.residual_norms;
        for k in 1..r.len() {
            assert!(r[k] <= r[k - 1] + 1e-12 * r[0]);
        }
    }

    #[test]
    fn histories_agree_on_symmetric_operator() {
        // symmetric indefinite with spread eigenvalues
        let n = 16;
        let mut rng = SplitMix64::new(3);
        let q = gaussian(&mut rng, n * n);
        let a = DMatrix::from_column_slice(n, n, &q);
        let sym = 0.5 * (&a + a.transpose());
        let op = DenseOp(&sym);
        let b = gaussian(&mut rng, n);
        let rule = StoppingRule::max_iter(12);
        let gm = gmres(&op, &b, &rule, None).unwrap();
        let mr = minres(&op, &b, &rule, None).unwrap();
        for (rg, rm) in gm
            .history
            .residual_norms
            .iter()
            .zip(&mr.history.residual_norms)
        {
            if *rg < 1e-8 {
                break;
            }
            assert!(
                (rg - rm).abs() <= 1e-5 * rg.max(*rm),
                "histories diverge: {rg} vs {rm}"
            );
        }
    }

    #[test]
    fn discrepancy_stops_and_snapshots() {
        let op = diag_op(vec![1.0, 2.0, 3.0, 4.0]);
        let b = [1.0, 1.0, 1.0, 1.0];
        let rule = StoppingRule::with_discrepancy(10, 0.4, 1.0);
        let report = gmres(&op, &b, &rule, None).unwrap();
        assert_eq!(report.history.stopped_by, StopReason::Discrepancy);
        let k = report.history.discrepancy_iter.unwrap();
        assert!(k >= 1);
        assert!(report.history.residual_norms[k] <= 0.4);
        assert!(report.history.residual_norms[k - 1] > 0.4);
        assert_eq!(
            report.solution_at_discrepancy.as_ref().unwrap(),
            &report.solution
        );
    }

    #[test]
    fn continue_after_discrepancy_keeps_iterating() {
        let op = diag_op(vec![1.0, 2.0, 3.0, 4.0]);
        let b = [1.0, 1.0, 1.0, 1.0];
        let truth = [1.0, 0.5, 1.0 / 3.0, 0.25];
        let rule = StoppingRule::with_discrepancy(10, 0.4, 1.0).keep_iterating();
        let report = gmres(&op, &b, &rule, Some(&truth)).unwrap();
        assert_eq!(report.history.stopped_by, StopReason::MaxIter);
        let k = report.history.discrepancy_iter.unwrap();
        assert!(report.history.iterations() > k);
        // exact solve: best iterate is the last one, far past the crossing
        let best = report.history.best_iter.unwrap();
        assert!(best > k);
        let rre = report.history.rre_per_iter.as_ref().unwrap();
        assert_eq!(rre.len(), report.history.residual_norms.len());
        let argmin = rre
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(best, argmin);
    }

    #[test]
    fn oversized_delta_stops_at_zero_iterations() {
        let op = diag_op(vec![1.0, 2.0]);
        let b = [1.0, 1.0];
        let rule = StoppingRule::with_discrepancy(5, 10.0, 1.0);
        let report = gmres(&op, &b, &rule, None).unwrap();
        assert_eq!(report.history.discrepancy_iter, Some(0));
        assert_eq!(report.history.iterations(), 0);
        assert!(report.solution.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_rhs_is_lucky_breakdown() {
        let op = diag_op(vec![1.0, 2.0]);
        let report = gmres(&op, &[0.0, 0.0], &StoppingRule::max_iter(5), None).unwrap();
        assert_eq!(report.history.breakdown, Some(BreakdownKind::Lucky));
        assert!(report.solution.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn singular_system_breaks_down_unluckily() {
        // b has a component in the null space direction that A never maps
        // back; the Krylov space closes after one step with residual left
        let op = diag_op(vec![1.0, 0.0]);
        let report = gmres(&op, &[1.0, 1.0], &StoppingRule::max_iter(5), None);
        match report {
            Ok(r) => assert_eq!(r.history.breakdown, Some(BreakdownKind::Unlucky)),
            Err(Error::NumericalFailure(_)) => {}
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn symmetry_probe_accepts_and_rejects() {
        let sym = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        assert!(symmetry_probe(&DenseOp(&sym), 1e-8).is_ok());
        let nonsym = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        assert!(matches!(
            symmetry_probe(&DenseOp(&nonsym), 1e-8),
            Err(Error::NotSymmetric { .. })
        ));
        let b = [1.0, 1.0];
        assert!(minres_checked(&DenseOp(&nonsym), &b, &StoppingRule::max_iter(2), None).is_err());
        assert!(minres_checked(&DenseOp(&sym), &b, &StoppingRule::max_iter(2), None).is_ok());
    }

    #[test]
    fn truth_with_zero_norm_is_rejected() {
        let op = diag_op(vec![1.0, 1.0]);
        let truth = [0.0, 0.0];
        assert!(matches!(
            gmres(&op, &[1.0, 1.0], &StoppingRule::max_iter(2), Some(&truth)),
            Err(Error::UndefinedRre)
        ));
    }

    #[test]
    fn csv_shape_with_and_without_truth() {
        let op = diag_op(vec![1.0, 2.0]);
        let b = [1.0, 1.0];
        let plain = gmres(&op, &b, &StoppingRule::max_iter(3), None).unwrap();
        let csv = plain.history.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("iter,residual_norm,rre"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,") && first.ends_with(','), "{first}");

        let truth = [1.0, 0.5];
        let tracked = gmres(&op, &b, &StoppingRule::max_iter(3), Some(&truth)).unwrap();
        let csv = tracked.history.to_csv();
        let second = csv.lines().nth(1).unwrap();
        assert!(second.starts_with("0,") && second.ends_with(",1"), "{second}");
    }

    #[test]
    fn discrepancy_delta_is_the_product() {
        assert_eq!(discrepancy_delta(0.01, 250.0), 2.5);
    }
}
