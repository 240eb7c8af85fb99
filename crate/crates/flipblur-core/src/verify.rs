//! Self-contained consistency checks behind `flipblur verify`.
//!
//! Each check is a small, independent oracle: hand-derived formulas,
//! algebraic identities, or cross-route comparisons (matrix-free against
//! dense, spectra against symbol samples). They run in a few hundred
//! milliseconds and catch the classic ways this kind of code rots:
//! off-by-one boundary indexing, transposed kernels, broken corner rules,
//! drifting random streams.

use crate::boundary::{extend, flip_dense, BcKind, BlurOperator};
use crate::imaging::{add_noise, synth_image, Image, NoiseSpec, SynthKind};
use crate::krylov::{discrepancy_delta, gmres, StoppingRule};
use crate::psf::Psf;
use crate::rng::SplitMix64;
use crate::spectral::{eigen_dense, singular_values_dense};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs every check; never panics outward.
pub fn run_all() -> Vec<CheckResult> {
    let checks: Vec<(&'static str, fn() -> Outcome)> = vec![
        ("dense-matches-apply", dense_matches_apply),
        ("smallest-legal-size", smallest_legal_size),
        ("constants-preserved", constants_preserved),
        ("ramps-preserved-antireflective", ramps_preserved),
        ("flip-symmetrizes", flip_symmetrizes),
        ("antireflective-corner-rule", antireflective_corner_rule),
        ("boundary-correction-pattern", correction_pattern),
        ("boundary-correction-rank", correction_rank),
        ("periodic-spectrum-is-symbol-samples", periodic_spectrum),
        ("noise-norm-identity", noise_norm_identity),
        ("psi-negation-symmetry", psi_negation_symmetry),
        ("discrepancy-stop-consistency", discrepancy_consistency),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(detail)) => CheckResult {
                name,
                passed: true,
                detail,
            },
            Ok(Err(detail)) => CheckResult {
                name,
                passed: false,
                detail,
            },
            Err(_) => CheckResult {
                name,
                passed: false,
                detail: "check panicked".into(),
            },
        })
        .collect()
}

type Outcome = std::result::Result<String, String>;

fn fail<T>(msg: String) -> std::result::Result<T, String> {
    Err(msg)
}

fn random_psf(dims: u8, half: usize, rng: &mut SplitMix64) -> Psf {
    let side = 2 * half + 1;
    let count = if dims == 1 { side } else { side * side };
    let coeffs: Vec<f64> = (0..count).map(|_| rng.next_f64() + 0.05).collect();
    match dims {
        1 => Psf::from_coeffs_1d(&coeffs).expect("valid random kernel"),
        _ => Psf::from_grid_2d(side, coeffs).expect("valid random kernel"),
    }
}

fn random_image(shape: (usize, usize), rng: &mut SplitMix64) -> Image {
    Image::new(
        shape,
        (0..shape.0 * shape.1).map(|_| rng.next_f64()).collect(),
    )
    .expect("lengths agree")
}

/// Matrix-free application against the assembled dense matrix.
fn dense_matches_apply() -> Outcome {
    let mut rng = SplitMix64::new(0xDE5E);
    let mut worst = 0.0_f64;
    let mut cases = 0;
    for bc in BcKind::ALL {
        for &(shape, dims, max_m) in &[((1usize, 7usize), 1u8, 3usize), ((5, 6), 2, 2)] {
            for m in 1..=max_m {
                let psf = random_psf(dims, m, &mut rng);
                let op = BlurOperator::new(psf, bc, shape).map_err(|e| e.to_string())?;
                let img = random_image(shape, &mut rng);
                let dense = op.assemble_dense().map_err(|e| e.to_string())?;
                let x = nalgebra::DVector::from_column_slice(img.data());
                let want = &dense * x;
                let got = op.apply(&img).map_err(|e| e.to_string())?;
                for (g, w) in got.data().iter().zip(want.as_slice()) {
                    worst = worst.max((g - w).abs());
                }
                cases += 1;
            }
        }
    }
    if worst < 1e-13 {
        Ok(format!("max deviation {worst:.2e} over {cases} cases"))
    } else {
        fail(format!("deviation {worst:.2e} over {cases} cases"))
    }
}

/// The minimum extent 2m+1 constructs and applies; anything below fails.
fn smallest_legal_size() -> Outcome {
    let psf1 = Psf::from_coeffs_1d(&[0.1, 0.2, 0.4, 0.2, 0.1]).map_err(|e| e.to_string())?;
    let psf2 = Psf::gaussian(2, 1.0, 2).map_err(|e| e.to_string())?;
    for bc in BcKind::ALL {
        for (psf, shape) in [(&psf1, (1usize, 5usize)), (&psf2, (5, 5))] {
            let op = BlurOperator::new(psf.clone(), bc, shape)
                .map_err(|e| format!("{bc} at minimum size: {e}"))?;
            let img = synth_image(SynthKind::Blob, shape);
            op.apply(&img).map_err(|e| e.to_string())?;
            op.assemble_dense().map_err(|e| e.to_string())?;
        }
        if BlurOperator::new(psf1.clone(), bc, (1, 4)).is_ok() {
            return fail(format!("{bc} accepted extent 4 with m = 2"));
        }
    }
    Ok("extent 2m+1 accepted, 2m rejected, for all boundary conditions".into())
}

/// Periodic/reflective/anti-reflective blurs fix constant images.
fn constants_preserved() -> Outcome {
    let mut rng = SplitMix64::new(0xC0);
    let mut worst = 0.0_f64;
    for bc in [BcKind::Periodic, BcKind::Reflective, BcKind::AntiReflective] {
        for &(shape, dims) in &[((1usize, 9usize), 1u8), ((6, 7), 2)] {
            let psf = random_psf(dims, 2, &mut rng);
            let op = BlurOperator::new(psf, bc, shape).map_err(|e| e.to_string())?;
            let flat = Image::new(shape, vec![1.0; shape.0 * shape.1]).unwrap();
            let out = op.apply(&flat).map_err(|e| e.to_string())?;
            for &v in out.data() {
                worst = worst.max((v - 1.0).abs());
            }
        }
    }
    if worst < 1e-13 {
        Ok(format!("max deviation from constant {worst:.2e}"))
    } else {
        fail(format!("constant image distorted by {worst:.2e}"))
    }
}

/// Anti-reflective blurs map 1D ramps to ramps with the same slope.
fn ramps_preserved() -> Outcome {
    let mut rng = SplitMix64::new(0xA3);
    let n = 12;
    for trial in 0..3 {
        let psf = random_psf(1, 2, &mut rng);
        let op = BlurOperator::new(psf, BcKind::AntiReflective, (1, n))
            .map_err(|e| e.to_string())?;
        let slope = 0.05 + 0.1 * trial as f64;
        let ramp =
            Image::from_vec_1d((0..n).map(|i| 0.2 + slope * i as f64).collect());
        let out = op.apply(&ramp).map_err(|e| e.to_string())?;
        let d = out.data();
        for i in 2..n {
            let second = d[i] - 2.0 * d[i - 1] + d[i - 2];
            if second.abs() > 1e-12 {
                return fail(format!("second difference {second:.2e} at index {i}"));
            }
        }
        if (d[1] - d[0] - slope).abs() > 1e-12 {
            return fail(format!("slope {} became {}", slope, d[1] - d[0]));
        }
    }
    Ok("ramps map to ramps with matching slope".into())
}

/// The flip makes zero/periodic operators exactly symmetric and
/// reflective ones symmetric exactly when the kernel is centrosymmetric.
fn flip_symmetrizes() -> Outcome {
    let shifted = Psf::from_coeffs_1d(&[0.2, 0.5, 0.3]).unwrap();
    for bc in [BcKind::Zero, BcKind::Periodic] {
        let op = BlurOperator::new(shifted.clone(), bc, (1, 9)).unwrap();
        let flipped = flip_dense(&op.assemble_dense().map_err(|e| e.to_string())?);
        let asym = (&flipped - flipped.transpose()).abs().max();
        if asym > 1e-14 {
            return fail(format!("flipped {bc} asymmetry {asym:.2e}"));
        }
    }
    let centro = Psf::gaussian(2, 1.0, 1).unwrap();
    let op = BlurOperator::new(centro, BcKind::Reflective, (1, 9)).unwrap();
    let flipped = flip_dense(&op.assemble_dense().map_err(|e| e.to_string())?);
    let asym_centro = (&flipped - flipped.transpose()).abs().max();
    if asym_centro > 1e-14 {
        return fail(format!(
            "flipped reflective with centrosymmetric kernel asymmetric: {asym_centro:.2e}"
        ));
    }
    let op = BlurOperator::new(shifted, BcKind::Reflective, (1, 9)).unwrap();
    let flipped = flip_dense(&op.assemble_dense().map_err(|e| e.to_string())?);
    let asym_shifted = (&flipped - flipped.transpose()).abs().max();
    if asym_shifted < 1e-6 {
        return fail("flipped reflective with shifted kernel unexpectedly symmetric".into());
    }
    Ok(format!(
        "zero/periodic exact; reflective {asym_centro:.1e} centrosymmetric vs {asym_shifted:.1e} shifted"
    ))
}

/// 2D anti-reflective padding against the direct corner formulas, which
/// the padding code never evaluates explicitly.
fn antireflective_corner_rule() -> Outcome {
    let mut rng = SplitMix64::new(0xC02);
    let (n1, n2) = (5usize, 6usize);
    let img = random_image((n1, n2), &mut rng);
    let m = 2usize;
    let padded = extend(&img, (m, m), BcKind::AntiReflective).map_err(|e| e.to_string())?;
    let f = |i: isize, j: isize| img.at(i as usize, j as usize);
    let mut worst = 0.0_f64;
    for i in 1..=m as isize {
        for j in 1..=m as isize {
            // top-left: f(1-i, 1-j) = 4 f(1,1) - 2 f(1,j+1) - 2 f(i+1,1) + f(i+1,j+1)
            let tl = 4.0 * f(0, 0) - 2.0 * f(0, j) - 2.0 * f(i, 0) + f(i, j);
            worst = worst.max((padded.at(m - i as usize, m - j as usize) - tl).abs());
            // top-right
            let tr = 4.0 * f(0, n2 as isize - 1) - 2.0 * f(0, n2 as isize - 1 - j)
                - 2.0 * f(i, n2 as isize - 1)
                + f(i, n2 as isize - 1 - j);
            worst =
                worst.max((padded.at(m - i as usize, m + n2 - 1 + j as usize) - tr).abs());
            // bottom-left
            let bl = 4.0 * f(n1 as isize - 1, 0) - 2.0 * f(n1 as isize - 1, j)
                - 2.0 * f(n1 as isize - 1 - i, 0)
                + f(n1 as isize - 1 - i, j);
            worst =
                worst.max((padded.at(m + n1 - 1 + i as usize, m - j as usize) - bl).abs());
            // bottom-right
            let br = 4.0 * f(n1 as isize - 1, n2 as isize - 1)
                - 2.0 * f(n1 as isize - 1, n2 as isize - 1 - j)
                - 2.0 * f(n1 as isize - 1 - i, n2 as isize - 1)
                + f(n1 as isize - 1 - i, n2 as isize - 1 - j);
            worst = worst.max(
                (padded.at(m + n1 - 1 + i as usize, m + n2 - 1 + j as usize) - br).abs(),
            );
        }
    }
    if worst < 1e-13 {
        Ok(format!("all four corner blocks match, deviation {worst:.2e}"))
    } else {
        fail(format!("corner formula deviation {worst:.2e}"))
    }
}

/// Zero pattern of the boundary correction W = A - T.
fn correction_pattern() -> Outcome {
    let mut rng = SplitMix64::new(0x9A);
    let (n, m) = (9usize, 2usize);
    let psf = random_psf(1, m, &mut rng);
    for bc in [BcKind::Reflective, BcKind::AntiReflective] {
        let op = BlurOperator::new(psf.clone(), bc, (1, n)).unwrap();
        let w = op.assemble_dense().map_err(|e| e.to_string())?
            - op.toeplitz_part(100).map_err(|e| e.to_string())?;
        for i in 1..=n {
            for c in 1..=n {
                let inside = match bc {
                    // Hankel corners: antidiagonal bands at the two corners
                    BcKind::Reflective => i + c <= m + 1 || i + c >= 2 * n + 1 - m,
                    // first/last column group and the corner blocks
                    _ => (i <= m && c <= m + 1) || (i >= n + 1 - m && c >= n - m),
                };
                let v = w[(i - 1, c - 1)];
                if !inside && v.abs() > 1e-15 {
                    return fail(format!("{bc}: unexpected W({i},{c}) = {v:.2e}"));
                }
            }
        }
    }
    Ok("W supported on the predicted boundary pattern".into())
}

/// The correction is low-rank: rank(W^R) <= 2m, rank(W^AR) <= 2m + 2.
fn correction_rank() -> Outcome {
    let mut rng = SplitMix64::new(0x4A11);
    let (n, m) = (12usize, 2usize);
    let psf = random_psf(1, m, &mut rng);
    for (bc, bound) in [
        (BcKind::Reflective, 2 * m),
        (BcKind::AntiReflective, 2 * m + 2),
    ] {
        let op = BlurOperator::new(psf.clone(), bc, (1, n)).unwrap();
        let w = op.assemble_dense().map_err(|e| e.to_string())?
            - op.toeplitz_part(100).map_err(|e| e.to_string())?;
        let sv = singular_values_dense(&w).map_err(|e| e.to_string())?;
        let rank = sv.iter().filter(|s| **s > 1e-12).count();
        if rank > bound {
            return fail(format!("{bc}: correction rank {rank} exceeds {bound}"));
        }
    }
    Ok("correction ranks within 2m (reflective) and 2m+2 (anti-reflective)".into())
}

/// Greedy nearest-neighbor multiset distance; immune to the sort-order
/// instability of conjugate pairs whose real parts differ by an ulp.
fn multiset_deviation(got: &[(f64, f64)], want: &[(f64, f64)]) -> f64 {
    assert_eq!(got.len(), want.len());
    let mut used = vec![false; want.len()];
    let mut worst = 0.0_f64;
    for g in got {
        let mut best = f64::INFINITY;
        let mut best_i = 0;
        for (i, w) in want.iter().enumerate() {
            if used[i] {
                continue;
            }
            let d = (g.0 - w.0).hypot(g.1 - w.1);
            if d < best {
                best = d;
                best_i = i;
            }
        }
        used[best_i] = true;
        worst = worst.max(best);
    }
    worst
}

/// Periodic operators are (multilevel) circulant: their eigenvalues are
/// exactly the symbol samples on the uniform grid.
fn periodic_spectrum() -> Outcome {
    let tau = 2.0 * std::f64::consts::PI;
    // 1D
    let psf = Psf::from_coeffs_1d(&[0.2, 0.5, 0.3]).unwrap();
    let n = 16;
    let op = BlurOperator::new(psf.clone(), BcKind::Periodic, (1, n)).unwrap();
    let report =
        eigen_dense(&op.assemble_dense().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let want: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v = psf.eval_symbol(&[tau * k as f64 / n as f64]).unwrap();
            (v.re, v.im)
        })
        .collect();
    let got: Vec<(f64, f64)> = report.eigenvalues.iter().map(|z| (z.re, z.im)).collect();
    let mut worst = multiset_deviation(&got, &want);
    // 2D
    let psf2 = Psf::speckle(1, 3).map_err(|e| e.to_string())?;
    let s = 4;
    let op2 = BlurOperator::new(psf2.clone(), BcKind::Periodic, (s, s)).unwrap();
    let report2 =
        eigen_dense(&op2.assemble_dense().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let want2: Vec<(f64, f64)> = (0..s * s)
        .map(|k| {
            let theta = [
                tau * (k / s) as f64 / s as f64,
                tau * (k % s) as f64 / s as f64,
            ];
            let v = psf2.eval_symbol(&theta).unwrap();
            (v.re, v.im)
        })
        .collect();
    let got2: Vec<(f64, f64)> = report2.eigenvalues.iter().map(|z| (z.re, z.im)).collect();
    worst = worst.max(multiset_deviation(&got2, &want2));
    if worst < 1e-10 {
        Ok(format!("spectra match symbol samples to {worst:.2e}"))
    } else {
        fail(format!("spectrum vs symbol deviation {worst:.2e}"))
    }
}

/// `||noisy - g|| = gamma ||g||` across seeds.
fn noise_norm_identity() -> Outcome {
    let g = synth_image(SynthKind::Blob, (8, 8));
    let gamma = 0.05;
    for seed in [1u64, 7, 99] {
        let noisy = add_noise(&g, &NoiseSpec { gamma, seed }).map_err(|e| e.to_string())?;
        let diff: f64 = noisy
            .data()
            .iter()
            .zip(g.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if (diff - gamma * g.norm2()).abs() > 1e-12 * g.norm2() {
            return fail(format!("seed {seed}: ||diff|| = {diff}"));
        }
    }
    Ok("noise norm identity holds across seeds".into())
}

/// psi samples are symmetric under negation.
fn psi_negation_symmetry() -> Outcome {
    let psf = Psf::speckle(2, 5).map_err(|e| e.to_string())?;
    let psi = psf.sample_psi(&[8, 4]).map_err(|e| e.to_string())?;
    let v = psi.values();
    for i in 0..v.len() {
        let s = v[i] + v[v.len() - 1 - i];
        if s.abs() > 1e-14 {
            return fail(format!("asymmetry {s:.2e} at index {i}"));
        }
    }
    Ok(format!("{} samples negation-symmetric", v.len()))
}

/// If the discrepancy stop fires, it fires at the first crossing.
fn discrepancy_consistency() -> Outcome {
    let psf = Psf::from_coeffs_1d(&[0.15, 0.2, 0.3, 0.2, 0.15]).unwrap();
    let n = 32;
    let truth = synth_image(SynthKind::Blob, (1, n));
    let op = BlurOperator::new(psf, BcKind::Zero, (1, n)).unwrap();
    let clean = op.apply(&truth).map_err(|e| e.to_string())?;
    let gamma = 0.05;
    let noisy = add_noise(&clean, &NoiseSpec { gamma, seed: 7 }).map_err(|e| e.to_string())?;
    let delta = discrepancy_delta(gamma, clean.norm2());
    let flipped_rhs: Vec<f64> = noisy.data().iter().rev().copied().collect();
    let rule = StoppingRule::with_discrepancy(n, delta, 1.0);
    let report = gmres(&op.flipped(), &flipped_rhs, &rule, None).map_err(|e| e.to_string())?;
    match report.history.discrepancy_iter {
        Some(k) => {
            let r = &report.history.residual_norms;
            if r[k] > delta {
                return fail(format!("residual {} above delta {delta} at stop", r[k]));
            }
            if k > 0 && r[k - 1] <= delta {
                return fail(format!("crossing missed at iteration {}", k - 1));
            }
            Ok(format!("stopped at iteration {k} with residual {:.3e}", r[k]))
        }
        None => fail("discrepancy never fired on a solvable desk-scale problem".into()),
    }
}
