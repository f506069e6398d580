use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant in J·s (CODATA 2018, exact by SI definition of h).
pub const HBAR_SI: f64 = 1.054_571_817e-34;

/// Internal unit system: every length, time and mass inside the library is a multiple
/// of these SI scales.
///
/// The default system for a particle of mass `m` is micrometre / microsecond / `m`,
/// which keeps ħ within a few orders of magnitude of one (≈7.5e-4 for rubidium).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    /// Metres per internal length unit.
    pub length_unit: f64,
    /// Seconds per internal time unit.
    pub time_unit: f64,
    /// Kilograms per internal mass unit.
    pub mass_unit: f64,
    hbar_internal: f64,
}

impl UnitSystem {
    pub fn new(length_unit: f64, time_unit: f64, mass_unit: f64) -> Result<Self> {
        for (name, v) in [
            ("length_unit", length_unit),
            ("time_unit", time_unit),
            ("mass_unit", mass_unit),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let hbar_internal = HBAR_SI * time_unit / (mass_unit * length_unit * length_unit);
        Ok(UnitSystem {
            length_unit,
            time_unit,
            mass_unit,
            hbar_internal,
        })
    }

    /// Micrometre / microsecond / particle-mass units.
    pub fn for_particle(mass_kg: f64) -> Result<Self> {
        Self::new(1e-6, 1e-6, mass_kg)
    }

    pub fn hbar(&self) -> f64 {
        self.hbar_internal
    }

    pub fn length_from_si(&self, metres: f64) -> f64 {
        metres / self.length_unit
    }

    pub fn length_to_si(&self, internal: f64) -> f64 {
        internal * self.length_unit
    }

    pub fn time_from_si(&self, seconds: f64) -> f64 {
        seconds / self.time_unit
    }

    pub fn time_to_si(&self, internal: f64) -> f64 {
        internal * self.time_unit
    }

    pub fn mass_from_si(&self, kg: f64) -> f64 {
        kg / self.mass_unit
    }

    fn momentum_unit(&self) -> f64 {
        self.mass_unit * self.length_unit / self.time_unit
    }

    pub fn momentum_from_si(&self, kg_m_per_s: f64) -> f64 {
        kg_m_per_s / self.momentum_unit()
    }

    pub fn momentum_to_si(&self, internal: f64) -> f64 {
        internal * self.momentum_unit()
    }

    pub fn acceleration_from_si(&self, m_per_s2: f64) -> f64 {
        m_per_s2 * self.time_unit * self.time_unit / self.length_unit
    }

    pub fn angular_frequency_from_si(&self, rad_per_s: f64) -> f64 {
        rad_per_s * self.time_unit
    }

    /// Momentum of `recoils` photon recoils `ħ·2π/λ`, in internal units.
    pub fn recoil_momentum(&self, recoils: f64, lambda_m: f64) -> f64 {
        recoils * self.hbar_internal * 2.0 * std::f64::consts::PI / self.length_from_si(lambda_m)
    }

    /// Converts a probability current (per internal time) to per second.
    pub fn current_to_si(&self, internal: f64) -> f64 {
        internal / self.time_unit
    }
}
