mod common;

use backflow_core::corenum::{integrate_1d, Grid1D, PhaseSpaceGrid};
use backflow_core::phasespace::*;
use backflow_core::states::WavefunctionState;
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn gauss(z: f64, std: f64) -> f64 {
    (-0.5 * (z / std).powi(2)).exp() / (std * (2.0 * PI).sqrt())
}

/// `(|ψ|² ∗ |φ|²)(x)` by direct quadrature.
fn position_convolution(s: &WavefunctionState, sigma_phi: f64, x: f64, t: f64) -> f64 {
    let r = 10.0 * sigma_phi;
    simpson_real(|y| s.psi(y, t).unwrap().norm_sqr() * gauss(x - y, sigma_phi), x - r, x + r, 2000)
}

/// `(|ψ̃|² ∗ |φ̃|²)(p)` with `|φ̃|²` a Gaussian of standard deviation ħ/(2σ_φ).
fn momentum_convolution(s: &WavefunctionState, sigma_phi: f64, p: f64, t: f64) -> f64 {
    let w = s.hbar() / (2.0 * sigma_phi);
    let r = 10.0 * w;
    simpson_real(|q| s.psi_momentum(q, t).unwrap().norm_sqr() * gauss(p - q, w), p - r, p + r, 2000)
}

/// Largest absolute deviations of the grid marginals from the convolution oracles, sampled at
/// every seventh node.
fn max_marginal_errors(s: &WavefunctionState, sigma_phi: f64, t: f64) -> (f64, f64) {
    let prec = precision(sigma_phi);
    let grid = default_grid(s, &prec, t).unwrap();
    let jd = joint_density(s, &prec, &grid, t).unwrap();
    let xm = position_marginal(&jd).unwrap();
    let pm = momentum_marginal(&jd).unwrap();
    let xs = grid.x.points();
    let ps = grid.p.points();
    let ex = (0..xs.len())
        .step_by(7)
        .map(|i| (xm[i] - position_convolution(s, sigma_phi, xs[i], t)).abs())
        .fold(0.0, f64::max);
    let ep = (0..ps.len())
        .step_by(7)
        .map(|j| (pm[j] - momentum_convolution(s, sigma_phi, ps[j], t)).abs())
        .fold(0.0, f64::max);
    (ex, ep)
}

#[test]
fn analytic_and_quadrature_overlaps_agree() {
    let s = gravity_state();
    let prec = precision(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let t = rng.gen_range(0.0..50.0);
        let x = 0.5 * s.gravity() * t * t + rng.gen_range(-2.0..2.0);
        let p = s.gravity() * t + rng.gen_range(-0.002..0.015);
        let a = wigner_moyal_overlap_with(&s, &prec, x, p, t, OverlapMethod::Analytic).unwrap();
        let q = wigner_moyal_overlap_with(&s, &prec, x, p, t, OverlapMethod::Quadrature).unwrap();
        let rel = (a - q).norm() / a.norm();
        worst = worst.max(rel);
    }
    assert!(worst < 1e-8, "worst relative deviation {worst}");
}

#[test]
fn overlap_vanishes_far_out_in_momentum() {
    let s = single_gaussian(1.0, 0.0, 0.0);
    let prec = precision(0.1);
    let peak = wigner_moyal_overlap(&s, &prec, 0.0, 0.0, 0.0).unwrap().norm_sqr();
    let envelope = (s.hbar() / 2.0f64).hypot(prec.momentum_std(s.hbar()));
    for p in [-10.0 * envelope, 10.0 * envelope] {
        assert!(wigner_moyal_overlap(&s, &prec, 0.0, p, 0.0).unwrap().norm_sqr() < 1e-12 * peak);
    }
}

#[test]
fn single_gaussian_position_marginal_is_widened_gaussian() {
    let s = single_gaussian(1.0, 0.0, 0.0);
    let prec = precision(0.1);
    let grid = default_grid(&s, &prec, 0.0).unwrap();
    let jd = joint_density(&s, &prec, &grid, 0.0).unwrap();
    let xm = position_marginal(&jd).unwrap();
    let std = (1.0f64 + 0.01).sqrt();
    for (x, v) in grid.x.points().iter().zip(&xm) {
        assert!((v - gauss(*x, std)).abs() < 1e-10);
    }
    assert!(jd.values.iter().all(|v| *v >= 0.0));
}

#[test]
fn marginals_match_convolutions_for_gravity_state() {
    let s = gravity_state();
    for t in [0.0, 30.0] {
        let (ex, ep) = max_marginal_errors(&s, 0.1, t);
        assert!(ex < 1e-5, "t={t}: position error {ex}");
        assert!(ep < 1e-5, "t={t}: momentum error {ep}");
    }
}

#[test]
fn total_mass_on_default_grid() {
    let s = gravity_state();
    let prec = precision(0.1);
    let grid = default_grid(&s, &prec, 25.0).unwrap();
    let jd = joint_density(&s, &prec, &grid, 25.0).unwrap();
    assert!((jd.total_mass().unwrap() - 1.0).abs() < 1e-4);
}

#[test]
fn narrow_grid_is_reported() {
    let s = gravity_state();
    let prec = precision(0.1);
    let grid = PhaseSpaceGrid::new(Grid1D::new(-1.0, 1.0, 64).unwrap(), Grid1D::new(-0.002, 0.002, 64).unwrap());
    assert!(matches!(
        joint_density(&s, &prec, &grid, 0.0),
        Err(backflow_core::Error::GridTooNarrow(_))
    ));
}

#[test]
fn symmetric_state_has_symmetric_marginals() {
    let s = single_gaussian(1.0, 0.0, 0.0);
    let prec = precision(0.1);
    let grid = default_grid(&s, &prec, 0.0).unwrap();
    let jd = joint_density(&s, &prec, &grid, 0.0).unwrap();
    for m in [position_marginal(&jd).unwrap(), momentum_marginal(&jd).unwrap()] {
        let peak = m.iter().cloned().fold(0.0, f64::max);
        let n = m.len();
        for i in 0..n {
            assert!((m[i] - m[n - 1 - i]).abs() <= 1e-10 * peak);
        }
    }
}

fn l1_to_exact(values: &[f64], grid: &Grid1D, exact: impl Fn(f64) -> f64) -> f64 {
    let diff: Vec<f64> = grid.points().iter().zip(values).map(|(x, v)| (v - exact(*x)).abs()).collect();
    integrate_1d(&diff, grid).unwrap()
}

#[test]
fn position_marginal_sharpens_as_precision_narrows() {
    let s = gravity_state();
    let t = 30.0;
    let mut last = f64::INFINITY;
    for sigma_phi in [0.1, 0.01, 0.001] {
        let prec = precision(sigma_phi);
        let grid = default_grid(&s, &prec, t).unwrap();
        let jd = joint_density(&s, &prec, &grid, t).unwrap();
        let err = l1_to_exact(&position_marginal(&jd).unwrap(), &grid.x, |x| s.psi(x, t).unwrap().norm_sqr());
        assert!(err < last, "σ_φ={sigma_phi}: {err} !< {last}");
        last = err;
    }
    assert!(last < 1e-3);
}

#[test]
fn momentum_marginal_sharpens_as_precision_widens() {
    let s = gravity_state();
    let t = 30.0;
    let mut last = f64::INFINITY;
    for sigma_phi in [0.1, 1.0, 10.0] {
        let prec = precision(sigma_phi);
        let grid = default_grid(&s, &prec, t).unwrap();
        let jd = joint_density(&s, &prec, &grid, t).unwrap();
        let err = l1_to_exact(&momentum_marginal(&jd).unwrap(), &grid.p, |p| s.psi_momentum(p, t).unwrap().norm_sqr());
        assert!(err < last, "σ_φ={sigma_phi}: {err} !< {last}");
        last = err;
    }
    assert!(last < 1e-2);
}

/// `(1/m) ∫_{-∞}^0 p |ψ̃|² dp` by direct quadrature.
fn sharp_negative_moment(s: &WavefunctionState, t: f64) -> f64 {
    let lo = -40.0 * s.hbar();
    simpson_real(|p| p * s.psi_momentum(p, t).unwrap().norm_sqr(), lo, 0.0, 4000) / s.mass()
}

#[test]
fn scaled_bound_approaches_sharp_momentum_moment_for_wide_precision() {
    // for σ_φ much wider than the packet, f(a, p) → |φ(a)|² |ψ̃(p)|², so
    // √(2π)·σ_φ·bound → (1/m) ∫_{-∞}^0 p |ψ̃|² dp
    let s = gravity_state();
    let t = 30.0;
    let target = sharp_negative_moment(&s, t);
    assert!(target < 0.0);
    let mut last = f64::INFINITY;
    for sigma_phi in [2.0, 4.0, 8.0, 16.0] {
        let b = negative_momentum_moment(&s, &precision(sigma_phi), 0.0, t).unwrap();
        let scaled = b * (2.0 * PI).sqrt() * sigma_phi;
        let gap = (scaled / target - 1.0).abs();
        assert!(gap < last, "σ_φ={sigma_phi}: gap {gap} !< {last}");
        last = gap;
    }
    assert!(last < 0.01, "final gap {last}");
}

#[test]
fn bound_vanishes_without_negative_momenta() {
    let s = single_gaussian(1.0, kick(), 0.0);
    let v = negative_momentum_moment(&s, &precision(1.0), 0.0, 0.0).unwrap();
    assert!(v.abs() < 1e-9, "{v}");
}

#[test]
fn bound_is_continuous_and_scales_with_inverse_precision_width() {
    // the smoothing width ħ/(2σ_φ) dominates the packet's own momentum spread, so the
    // bound behaves like 1/σ_φ: σ_φ·bound varies little while the bound itself does not
    let s = gravity_state();
    let b = |sp: f64| negative_momentum_moment(&s, &precision(sp), 0.0, 30.0).unwrap();
    let reference = 0.1 * b(0.1);
    for sp in [0.05, 0.07, 0.14, 0.2] {
        let v = b(sp);
        assert!(v < 0.0);
        assert!((sp * v / reference - 1.0).abs() < 0.2, "σ_φ {sp}: {v}");
    }
    let (u, v) = (b(0.1), b(0.1 * 1.001));
    assert!((u - v).abs() < 2e-3 * u.abs());
}

#[test]
fn joint_density_is_independent_of_thread_count() {
    let s = gravity_state();
    let prec = precision(0.1);
    let grid = default_grid_with(&s, &prec, 25.0, 96, 8.0).unwrap();
    let parallel = joint_density(&s, &prec, &grid, 25.0).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| joint_density(&s, &prec, &grid, 25.0).unwrap());
    assert_eq!(parallel.values, serial.values);
}
