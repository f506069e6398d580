//! Finite-precision joint position–momentum density.
//!
//! `f_t(x, p) = |⟨φ|W(x,p)|ψ_t⟩|²` where the overlap is the Wigner–Moyal transform
//! `(2πħ)^{-1/2} ∫ e^{-ipy/ħ} φ*(y - x/2) ψ(y + x/2) dy` and `φ` is a centred Gaussian
//! precision function. The family of projectors is a POVM on phase space, so `f_t` is a
//! genuine probability density whose marginals are the position (momentum) densities
//! convolved with `|φ|²` (`|φ̃|²`).
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corenum::{adaptive_integrate, adaptive_integrate_real, integrate_1d, Grid1D, PhaseSpaceGrid};
use crate::error::{Error, Result};
use crate::states::{sum_eval, sum_support, GaussianTerm, WavefunctionState};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative boundary level above which a grid is reported as too narrow.
pub const BOUNDARY_THRESHOLD: f64 = 1e-10;
/// Nodes per axis of the default phase-space grid.
pub const DEFAULT_GRID_NODES: usize = 512;
/// Half-width of the default grid in smoothed standard deviations.
pub const DEFAULT_GRID_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionKind {
    Gaussian,
}

/// Precision function `φ`: a centred Gaussian whose squared modulus has standard deviation
/// `sigma_phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionSpec {
    pub kind: PrecisionKind,
    /// Internal length units.
    pub sigma_phi: f64,
}

impl PrecisionSpec {
    pub fn gaussian(sigma_phi: f64) -> Result<Self> {
        let spec = PrecisionSpec {
            kind: PrecisionKind::Gaussian,
            sigma_phi,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_phi.is_finite() && self.sigma_phi > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("sigma_phi must be positive, got {}", self.sigma_phi)))
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let s = self.sigma_phi;
        (2.0 * PI * s * s).powf(-0.25) * (-y * y / (4.0 * s * s)).exp()
    }

    /// `φ*(u - shift)` as a Gaussian term in `u`.
    pub fn window(&self, shift: f64) -> GaussianTerm {
        let s = self.sigma_phi;
        GaussianTerm {
            coeff: Complex64::from((2.0 * PI * s * s).powf(-0.25)),
            width: Complex64::from(1.0 / (4.0 * s * s)),
            center: shift,
            wavenumber: 0.0,
        }
    }

    /// Standard deviation of `|φ̃|²`.
    pub fn momentum_std(&self, hbar: f64) -> f64 {
        hbar / (2.0 * self.sigma_phi)
    }
}

/// Momentum-space Gaussian terms `G_n(p)` with `⟨φ|W(x,p)|ψ⟩ = e^{ipx/2ħ} Σ G_n(p)`.
pub fn overlap_terms(psi_terms: &[GaussianTerm], precision: &PrecisionSpec, x: f64, hbar: f64) -> Vec<GaussianTerm> {
    let window = precision.window(x);
    psi_terms.iter().map(|t| window.mul(t).fourier(hbar)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapMethod {
    /// Closed-form Gaussian algebra.
    Analytic,
    /// Direct adaptive quadrature of the transform integral.
    Quadrature,
}

pub fn wigner_moyal_overlap(
    state: &WavefunctionState,
    precision: &PrecisionSpec,
    x: f64,
    p: f64,
    t: f64,
) -> Result<Complex64> {
    wigner_moyal_overlap_with(state, precision, x, p, t, OverlapMethod::Analytic)
}

pub fn wigner_moyal_overlap_with(
    state: &WavefunctionState,
    precision: &PrecisionSpec,
    x: f64,
    p: f64,
    t: f64,
    method: OverlapMethod,
) -> Result<Complex64> {
    precision.validate()?;
    let hbar = state.hbar();
    let terms = state.terms(t)?;
    match method {
        OverlapMethod::Analytic => {
            let g = overlap_terms(&terms, precision, x, hbar);
            Ok((I * (p * x / (2.0 * hbar))).exp() * sum_eval(&g, p))
        }
        OverlapMethod::Quadrature => {
            let half = 0.5 * x;
            let reach = crate::corenum::GAUSSIAN_TAIL_SIGMAS * precision.sigma_phi * std::f64::consts::SQRT_2;
            let integrand = |y: f64| {
                (-I * (p * y / hbar)).exp() * precision.eval(y - half) * sum_eval(&terms, y + half)
            };
            let v = adaptive_integrate(integrand, half - reach, half + reach, 1e-11)?;
            Ok(v / (2.0 * PI * hbar).sqrt())
        }
    }
}

/// Grid-sampled `f_t(x, p)`, row-major with `x` as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDensity {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<f64>,
    pub t: f64,
    pub precision: PrecisionSpec,
}

impl JointDensity {
    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[self.grid.index(ix, ip)]
    }

    pub fn row(&self, ix: usize) -> &[f64] {
        let np = self.grid.p.len();
        &self.values[ix * np..(ix + 1) * np]
    }

    /// Trapezoid double integral over the grid.
    pub fn total_mass(&self) -> Result<f64> {
        integrate_1d(&position_marginal(self)?, &self.grid.x)
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Default grid: `⟨x⟩ ± 8 s_x`, `⟨p⟩ ± 8 s_p` with smoothed standard deviations, 512 × 512 nodes.
pub fn default_grid(state: &WavefunctionState, precision: &PrecisionSpec, t: f64) -> Result<PhaseSpaceGrid> {
    default_grid_with(state, precision, t, DEFAULT_GRID_NODES, DEFAULT_GRID_SIGMAS)
}

pub fn default_grid_with(
    state: &WavefunctionState,
    precision: &PrecisionSpec,
    t: f64,
    nodes: usize,
    sigmas: f64,
) -> Result<PhaseSpaceGrid> {
    let (mx, vx) = state.position_moments(t)?;
    let (mp, vp) = state.momentum_moments(t)?;
    let sx = (vx + precision.sigma_phi.powi(2)).sqrt();
    let sp = (vp + precision.momentum_std(state.hbar()).powi(2)).sqrt();
    Ok(PhaseSpaceGrid::new(
        Grid1D::new(mx - sigmas * sx, mx + sigmas * sx, nodes)?,
        Grid1D::new(mp - sigmas * sp, mp + sigmas * sp, nodes)?,
    ))
}

pub fn joint_density(
    state: &WavefunctionState,
    precision: &PrecisionSpec,
    grid: &PhaseSpaceGrid,
    t: f64,
) -> Result<JointDensity> {
    precision.validate()?;
    let hbar = state.hbar();
    let terms = state.terms(t)?;
    let ps = grid.p.points();
    let rows: Vec<Vec<f64>> = grid
        .x
        .points()
        .par_iter()
        .map(|&x| {
            let g = overlap_terms(&terms, precision, x, hbar);
            ps.iter().map(|&p| sum_eval(&g, p).norm_sqr()).collect()
        })
        .collect();
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    let jd = JointDensity {
        grid: *grid,
        values,
        t,
        precision: *precision,
    };
    check_boundary(&jd)?;
    Ok(jd)
}

fn check_boundary(jd: &JointDensity) -> Result<()> {
    let (nx, np) = (jd.grid.x.len(), jd.grid.p.len());
    let peak = jd.peak();
    let mut edge: f64 = 0.0;
    for ix in 0..nx {
        edge = edge.max(jd.at(ix, 0)).max(jd.at(ix, np - 1));
    }
    for ip in 0..np {
        edge = edge.max(jd.at(0, ip)).max(jd.at(nx - 1, ip));
    }
    if edge > BOUNDARY_THRESHOLD * peak {
        return Err(Error::GridTooNarrow(format!(
            "boundary value {edge:e} exceeds {BOUNDARY_THRESHOLD:e} of peak {peak:e}"
        )));
    }
    Ok(())
}

/// `∫ f(x, p) dp` at every x node.
pub fn position_marginal(jd: &JointDensity) -> Result<Vec<f64>> {
    (0..jd.grid.x.len())
        .map(|ix| integrate_1d(jd.row(ix), &jd.grid.p))
        .collect()
}

/// `∫ f(x, p) dx` at every p node.
pub fn momentum_marginal(jd: &JointDensity) -> Result<Vec<f64>> {
    let nx = jd.grid.x.len();
    (0..jd.grid.p.len())
        .map(|ip| {
            let column: Vec<f64> = (0..nx).map(|ix| jd.at(ix, ip)).collect();
            integrate_1d(&column, &jd.grid.x)
        })
        .collect()
}

/// `(1/m) ∫_{-∞}^0 p f_t(x, p) dp`, always `≤ 0`.
pub fn negative_momentum_moment(
    state: &WavefunctionState,
    precision: &PrecisionSpec,
    x: f64,
    t: f64,
) -> Result<f64> {
    precision.validate()?;
    let hbar = state.hbar();
    let g = overlap_terms(&state.terms(t)?, precision, x, hbar);
    let (lo, _) = sum_support(&g);
    if lo >= 0.0 {
        return Ok(0.0);
    }
    let v = adaptive_integrate_real(|p| p * sum_eval(&g, p).norm_sqr(), lo, 0.0, 1e-9)?;
    Ok(v.min(0.0) / state.mass())
}

/// `∫ f_t(x, p) dp` at a single point, i.e. the smoothed position density at `x`.
pub fn smoothed_position_density(
    state: &WavefunctionState,
    precision: &PrecisionSpec,
    x: f64,
    t: f64,
) -> Result<f64> {
    let g = overlap_terms(&state.terms(t)?, precision, x, state.hbar());
    let (lo, hi) = sum_support(&g);
    adaptive_integrate_real(|p| sum_eval(&g, p).norm_sqr(), lo, hi, 1e-10)
}
