#![allow(dead_code)]
use std::f64::consts::PI;

use backflow_core::corenum::UnitSystem;
use backflow_core::phasespace::PrecisionSpec;
use backflow_core::states::{
    CoherentBranch, CoherentSuperpositionSpec, GaussianBranch, GaussianSuperpositionSpec, PhysicalParams,
    StateModel, WavefunctionState,
};
use num_complex::Complex64;

pub const RB_MASS: f64 = 1.4e-25;
pub const WEIGHT_REST: f64 = 1.18e-3;
pub const WEIGHT_KICKED: f64 = 4.42e-4;

pub fn hbar() -> f64 {
    UnitSystem::for_particle(RB_MASS).unwrap().hbar()
}

/// Two photon recoils at 780 nm, internal units.
pub fn kick() -> f64 {
    2.0 * hbar() * 2.0 * PI / 0.78
}

pub fn two_branch(sigma: f64, momenta: [f64; 2], g: f64) -> WavefunctionState {
    let spec = GaussianSuperpositionSpec {
        sigma,
        branches: vec![
            GaussianBranch { weight: Complex64::new(WEIGHT_REST, 0.0), momentum: momenta[0] },
            GaussianBranch { weight: Complex64::new(WEIGHT_KICKED, 0.0), momentum: momenta[1] },
        ],
    };
    let model = if g == 0.0 { StateModel::FreeGaussian(spec) } else { StateModel::LinearPotential(spec) };
    WavefunctionState::new(model, PhysicalParams { mass: RB_MASS, g, omega: 0.0 }).unwrap()
}

pub fn gravity_state() -> WavefunctionState {
    two_branch(1.0, [0.0, kick()], 9.8)
}

pub fn single_gaussian(sigma: f64, momentum: f64, g: f64) -> WavefunctionState {
    let spec = GaussianSuperpositionSpec {
        sigma,
        branches: vec![GaussianBranch { weight: Complex64::new(1.0, 0.0), momentum }],
    };
    let model = if g == 0.0 { StateModel::FreeGaussian(spec) } else { StateModel::LinearPotential(spec) };
    WavefunctionState::new(model, PhysicalParams { mass: RB_MASS, g, omega: 0.0 }).unwrap()
}

pub fn harmonic_state() -> WavefunctionState {
    let spec = CoherentSuperpositionSpec {
        branches: vec![
            CoherentBranch { weight: Complex64::new(1.0, 0.0), alpha0: Complex64::from_polar(1.0, 0.9 * PI) },
            CoherentBranch { weight: Complex64::new(1.0, 0.0), alpha0: Complex64::from_polar(9.0, 0.55 * PI) },
        ],
    };
    WavefunctionState::new(
        StateModel::HarmonicCoherent(spec),
        PhysicalParams { mass: RB_MASS, g: 0.0, omega: 2.0 * PI * 1e4 },
    )
    .unwrap()
}

/// Detection level of the harmonic example: the initial centre of the large coherent branch.
pub fn harmonic_level(state: &WavefunctionState) -> f64 {
    (2.0 * state.hbar() / (state.mass() * state.omega())).sqrt() * (0.55 * PI).cos()
}

pub fn precision(sigma_phi: f64) -> PrecisionSpec {
    PrecisionSpec::gaussian(sigma_phi).unwrap()
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> Complex64>(f: F, lo: f64, hi: f64, n: usize) -> Complex64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += f(lo + i as f64 * h) * w;
    }
    s * (h / 3.0)
}

pub fn simpson_real<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    simpson(|x| Complex64::from(f(x)), lo, hi, n).re
}

/// Complementary error function, fractional error below 1.2e-7.
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}
