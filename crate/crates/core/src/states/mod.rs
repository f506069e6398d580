//! Analytic wavefunction families: free and uniformly accelerated Gaussian superpositions,
//! and superpositions of harmonic-oscillator coherent states.
//!
//! Every state is, at every time, a finite sum of complex Gaussians ([`GaussianTerm`]), so
//! position amplitudes, derivatives and momentum amplitudes are all closed-form.
mod gaussian;

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use gaussian::{sum_derivative, sum_eval, sum_norm_sqr, sum_support, GaussianTerm};

use crate::corenum::{adaptive_integrate_real, UnitSystem};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Physical constants of a scenario, in SI units.
///
/// The x axis points downwards, so a positive `g` accelerates the particle towards `+x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// kg
    pub mass: f64,
    /// m/s²
    pub g: f64,
    /// rad/s
    pub omega: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::invalid(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(Error::invalid(format!("g must be non-negative, got {}", self.g)));
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::invalid(format!("omega must be non-negative, got {}", self.omega)));
        }
        if self.g > 0.0 && self.omega > 0.0 {
            return Err(Error::invalid("at most one of g and omega may be nonzero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBranch {
    pub weight: Complex64,
    /// Mean momentum, internal units.
    pub momentum: f64,
}

/// Superposition of equal-width Gaussians centred at the origin at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSuperpositionSpec {
    /// Width parameter σ (internal length); `|ψ|²` of one branch has standard deviation σ.
    pub sigma: f64,
    pub branches: Vec<GaussianBranch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentBranch {
    pub weight: Complex64,
    /// Coherent amplitude at `t = 0`.
    pub alpha0: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentSuperpositionSpec {
    pub branches: Vec<CoherentBranch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    FreeGaussianSuperposition,
    LinearPotential,
    HarmonicCoherent,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free-gaussian-superposition" => Ok(ModelKind::FreeGaussianSuperposition),
            "linear-potential" => Ok(ModelKind::LinearPotential),
            "harmonic-coherent" => Ok(ModelKind::HarmonicCoherent),
            other => Err(Error::invalid(format!("unknown model tag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateModel {
    FreeGaussian(GaussianSuperpositionSpec),
    LinearPotential(GaussianSuperpositionSpec),
    HarmonicCoherent(CoherentSuperpositionSpec),
}

impl StateModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            StateModel::FreeGaussian(_) => ModelKind::FreeGaussianSuperposition,
            StateModel::LinearPotential(_) => ModelKind::LinearPotential,
            StateModel::HarmonicCoherent(_) => ModelKind::HarmonicCoherent,
        }
    }
}

/// An immutable, normalised wavefunction with closed-form time evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionState {
    model: StateModel,
    physical: PhysicalParams,
    units: UnitSystem,
    mass: f64,
    g: f64,
    omega: f64,
    normalization: f64,
}

impl WavefunctionState {
    pub fn new(model: StateModel, physical: PhysicalParams) -> Result<Self> {
        physical.validate()?;
        let units = UnitSystem::for_particle(physical.mass)?;
        let mass = units.mass_from_si(physical.mass);
        let g = units.acceleration_from_si(physical.g);
        let omega = units.angular_frequency_from_si(physical.omega);
        match &model {
            StateModel::FreeGaussian(spec) | StateModel::LinearPotential(spec) => {
                if !(spec.sigma.is_finite() && spec.sigma > 0.0) {
                    return Err(Error::invalid(format!("sigma must be positive, got {}", spec.sigma)));
                }
                check_weights(spec.branches.iter().map(|b| b.weight))?;
                if spec.branches.iter().any(|b| !b.momentum.is_finite()) {
                    return Err(Error::invalid("branch momenta must be finite"));
                }
                if matches!(model, StateModel::FreeGaussian(_)) && physical.g != 0.0 {
                    return Err(Error::invalid("free model requires g = 0"));
                }
                if physical.omega != 0.0 {
                    return Err(Error::invalid("Gaussian superposition models require omega = 0"));
                }
            }
            StateModel::HarmonicCoherent(spec) => {
                check_weights(spec.branches.iter().map(|b| b.weight))?;
                if spec.branches.iter().any(|b| !(b.alpha0.re.is_finite() && b.alpha0.im.is_finite())) {
                    return Err(Error::invalid("coherent amplitudes must be finite"));
                }
                if !(physical.omega > 0.0) {
                    return Err(Error::invalid("harmonic model requires omega > 0"));
                }
            }
        }
        let mut state = WavefunctionState {
            model,
            physical,
            units,
            mass,
            g,
            omega,
            normalization: 1.0,
        };
        let n2 = sum_norm_sqr(&state.raw_terms(0.0));
        if !(n2.is_finite() && n2 > 0.0) {
            return Err(Error::invalid("state has zero norm (branches cancel)"));
        }
        state.normalization = 1.0 / n2.sqrt();
        Ok(state)
    }

    pub fn model(&self) -> &StateModel {
        &self.model
    }

    pub fn physical(&self) -> &PhysicalParams {
        &self.physical
    }

    pub fn units(&self) -> &UnitSystem {
        &self.units
    }

    pub fn hbar(&self) -> f64 {
        self.units.hbar()
    }

    /// Particle mass in internal units (1 in the default system).
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Gravitational acceleration in internal units.
    pub fn gravity(&self) -> f64 {
        self.g
    }

    /// Trap angular frequency in internal units.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// A copy of this state with a different gravitational acceleration (SI).
    pub fn with_gravity(&self, g_si: f64) -> Result<Self> {
        let model = match &self.model {
            StateModel::FreeGaussian(s) | StateModel::LinearPotential(s) => {
                if g_si == 0.0 {
                    StateModel::FreeGaussian(s.clone())
                } else {
                    StateModel::LinearPotential(s.clone())
                }
            }
            StateModel::HarmonicCoherent(_) => {
                return Err(Error::invalid("gravity cannot be added to the harmonic model"))
            }
        };
        WavefunctionState::new(model, PhysicalParams { g: g_si, ..self.physical })
    }

    fn raw_terms(&self, t: f64) -> Vec<GaussianTerm> {
        let hbar = self.hbar();
        let m = self.mass;
        match &self.model {
            StateModel::FreeGaussian(spec) | StateModel::LinearPotential(spec) => {
                let g = if matches!(self.model, StateModel::FreeGaussian(_)) { 0.0 } else { self.g };
                let w = Complex64::new(4.0 * spec.sigma * spec.sigma, 2.0 * hbar * t / m);
                let sqrt_w = w.sqrt();
                let fall = 0.5 * g * t * t;
                spec.branches
                    .iter()
                    .map(|b| {
                        let p = b.momentum;
                        let center = fall + p * t / m;
                        let wavenumber = (p + m * g * t) / hbar;
                        let phase = wavenumber * center
                            - p * (fall + p * t / (2.0 * m)) / hbar
                            - m * g * g * t * t * t / (6.0 * hbar);
                        GaussianTerm {
                            coeff: b.weight / sqrt_w * (I * phase).exp(),
                            width: 1.0 / w,
                            center,
                            wavenumber,
                        }
                    })
                    .collect()
            }
            StateModel::HarmonicCoherent(spec) => {
                let omega = self.omega;
                let length = (2.0 * hbar / (m * omega)).sqrt();
                let momentum = (2.0 * hbar * m * omega).sqrt();
                let prefactor = (m * omega / (PI * hbar)).powf(0.25);
                let global = (-I * (0.5 * omega * t)).exp();
                spec.branches
                    .iter()
                    .map(|b| {
                        let alpha = b.alpha0 * (-I * (omega * t)).exp();
                        let (xa, pa) = (length * alpha.re, momentum * alpha.im);
                        GaussianTerm {
                            coeff: b.weight * prefactor * global * (I * (pa * xa / (2.0 * hbar))).exp(),
                            width: Complex64::new(m * omega / (2.0 * hbar), 0.0),
                            center: xa,
                            wavenumber: pa / hbar,
                        }
                    })
                    .collect()
            }
        }
    }

    /// Position-space branches of the normalised state at time `t`.
    pub fn terms(&self, t: f64) -> Result<Vec<GaussianTerm>> {
        check_time(t)?;
        let n = Complex64::from(self.normalization);
        Ok(self.raw_terms(t).iter().map(|term| term.scale(n)).collect())
    }

    /// Momentum-space branches of the normalised state at time `t`.
    pub fn momentum_terms(&self, t: f64) -> Result<Vec<GaussianTerm>> {
        let hbar = self.hbar();
        Ok(self.terms(t)?.iter().map(|term| term.fourier(hbar)).collect())
    }

    pub fn psi(&self, x: f64, t: f64) -> Result<Complex64> {
        Ok(sum_eval(&self.terms(t)?, x))
    }

    pub fn dpsi_dx(&self, x: f64, t: f64) -> Result<Complex64> {
        Ok(sum_derivative(&self.terms(t)?, x))
    }

    pub fn psi_momentum(&self, p: f64, t: f64) -> Result<Complex64> {
        Ok(sum_eval(&self.momentum_terms(t)?, p))
    }

    /// `∫|ψ_t|² dx` by adaptive quadrature over the numerical support.
    pub fn norm(&self, t: f64) -> Result<f64> {
        let terms = self.terms(t)?;
        let (lo, hi) = sum_support(&terms);
        adaptive_integrate_real(|x| sum_eval(&terms, x).norm_sqr(), lo, hi, 1e-12)
    }

    /// `∫|ψ̃_t|² dp` by adaptive quadrature.
    pub fn momentum_norm(&self, t: f64) -> Result<f64> {
        let terms = self.momentum_terms(t)?;
        let (lo, hi) = sum_support(&terms);
        adaptive_integrate_real(|p| sum_eval(&terms, p).norm_sqr(), lo, hi, 1e-12)
    }

    /// Mean and variance of position at time `t`.
    pub fn position_moments(&self, t: f64) -> Result<(f64, f64)> {
        moments(&self.terms(t)?)
    }

    /// Mean and variance of momentum at time `t`.
    pub fn momentum_moments(&self, t: f64) -> Result<(f64, f64)> {
        moments(&self.momentum_terms(t)?)
    }

    /// `∫_{-∞}^0 |ψ̃_t(p)|² dp`.
    pub fn negative_momentum_probability(&self, t: f64) -> Result<f64> {
        let terms = self.momentum_terms(t)?;
        let (lo, _) = sum_support(&terms);
        if lo >= 0.0 {
            return Ok(0.0);
        }
        adaptive_integrate_real(|p| sum_eval(&terms, p).norm_sqr(), lo, 0.0, 1e-10)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("time must be finite and non-negative, got {t}")))
    }
}

fn check_weights(weights: impl Iterator<Item = Complex64>) -> Result<()> {
    let w: Vec<Complex64> = weights.collect();
    if w.is_empty() {
        return Err(Error::invalid("at least one branch is required"));
    }
    if w.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::invalid("branch weights must be finite"));
    }
    if w.iter().all(|z| z.norm() == 0.0) {
        return Err(Error::invalid("branch weights must not all be zero"));
    }
    Ok(())
}

fn moments(terms: &[GaussianTerm]) -> Result<(f64, f64)> {
    let (lo, hi) = sum_support(terms);
    let density = |x: f64| sum_eval(terms, x).norm_sqr();
    let mass = adaptive_integrate_real(density, lo, hi, 1e-12)?;
    let mean = adaptive_integrate_real(|x| x * density(x), lo, hi, 1e-12)? / mass;
    let var = adaptive_integrate_real(|x| (x - mean).powi(2) * density(x), lo, hi, 1e-12)? / mass;
    Ok((mean, var))
}
