//! Shared numerics: unit handling, uniform grids, quadrature and finite differences.
mod grid;
mod quadrature;
mod units;

pub use grid::{Grid1D, PhaseSpaceGrid};
pub use quadrature::{
    adaptive_integrate, adaptive_integrate_real, adaptive_integrate_with, central_derivative,
    integrate_1d, integrate_linear_between, AdaptiveOptions, QuadratureResult,
};
pub use units::{UnitSystem, HBAR_SI};

/// Envelope standard deviations at which a Gaussian falls below 1e-16 of its peak
/// (`exp(-x^2/2) < 1e-16` needs `x > 8.58`).
pub const GAUSSIAN_TAIL_SIGMAS: f64 = 8.6;
