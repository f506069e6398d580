//! Scenario files: JSON with SI units on the wire, converted to internal units on load.
use std::f64::consts::PI;
use std::path::Path;

use anyhow::anyhow;
use backflow_core::backflow::{DetectionQuery, DEFAULT_SCAN_POINTS};
use backflow_core::corenum::UnitSystem;
use backflow_core::optimizer::{Family, ObjectiveKind, ParamBound, SearchSpace, SearchTemplate};
use backflow_core::phasespace::PrecisionSpec;
use backflow_core::states::{
    CoherentBranch, CoherentSuperpositionSpec, GaussianBranch, GaussianSuperpositionSpec, PhysicalParams,
    StateModel, WavefunctionState,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliResult, CoreContext, Failure};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub version: u32,
    pub name: String,
    pub particle: Particle,
    pub potential: Potential,
    pub state: StateInput,
    pub precision: PrecisionInput,
    pub query: QueryInput,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Particle {
    pub mass_kg: f64,
}

/// `"free"`, `{"gravity": {"g_m_per_s2": ..}}` or `{"harmonic": {"nu_hz": ..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Free,
    Gravity { g_m_per_s2: f64 },
    Harmonic { nu_hz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateInput {
    GaussianSuperposition { sigma_m: f64, branches: Vec<GaussianBranchInput> },
    CoherentSuperposition { branches: Vec<CoherentBranchInput> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBranchInput {
    /// `[re, im]`; only ratios matter, the state is renormalised.
    pub weight: [f64; 2],
    pub momentum: MomentumInput,
}

/// Either kg·m/s or a number of photon recoils `ħ·2π/λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MomentumInput {
    KgMetrePerSecond(f64),
    Recoils { recoils: f64, lambda_nm: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherentBranchInput {
    pub weight: [f64; 2],
    pub alpha: PolarInput,
}

/// `abs · exp(iπ · phase_pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarInput {
    pub abs: f64,
    pub phase_pi: f64,
}

impl PolarInput {
    fn value(&self) -> Complex64 {
        Complex64::from_polar(self.abs, self.phase_pi * PI)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionInput {
    pub sigma_phi_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryInput {
    pub a_m: LevelInput,
    pub t_start_s: f64,
    pub t_end_s: f64,
    #[serde(default = "default_scan_points")]
    pub n_times: usize,
    pub delta_t_s: f64,
}

/// Detection level in metres, or the centre `√(2ħ/mω)·Re α` of a coherent amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelInput {
    Metres(f64),
    AlphaPosition { alpha_position: PolarInput },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// Time series CSV of the detection scan.
    ReportCsv,
    /// The full detection report as JSON.
    ReportJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default)]
    pub objective: ObjectiveKind,
    /// Scan window used during the search instead of the query's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_times: Option<usize>,
    /// Per-parameter `[lower, upper]` in the family's order; momenta in kg·m/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowInput {
    pub t_start_s: f64,
    pub t_end_s: f64,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::ReportCsv]
}

fn default_scan_points() -> usize {
    DEFAULT_SCAN_POINTS
}

/// A parsed scenario in internal units.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub units: UnitSystem,
    pub state: WavefunctionState,
    pub precision: PrecisionSpec,
    pub query: DetectionQuery,
    /// SHA-256 of the scenario's canonical compact JSON.
    pub sha256: String,
}

pub fn load(path: &Path) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(anyhow!("cannot read scenario {}: {e}", path.display())))?;
    parse_str(&text, &path.display().to_string())
}

/// Parses scenario text; `origin` names the source in diagnostics.
pub fn parse_str(text: &str, origin: &str) -> CliResult<Scenario> {
    let mut de = serde_json::Deserializer::from_str(text);
    let spec: ScenarioSpec = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Failure::usage(anyhow!("{origin}: invalid scenario at `{path}`: {}", e.into_inner()))
    })?;
    de.end().map_err(|e| Failure::usage(anyhow!("{origin}: {e}")))?;
    let canonical: serde_json::Value = serde_json::from_str(text).map_err(|e| Failure::usage(anyhow!("{origin}: {e}")))?;
    Scenario::from_spec(spec, canonical_hash(&canonical)).map_err(|f| match f {
        Failure::Usage(e) => Failure::Usage(e.context(format!("{origin}: invalid scenario"))),
        other => other,
    })
}

/// Keys sorted, no whitespace, so the hash ignores formatting.
pub fn canonical_hash(value: &serde_json::Value) -> String {
    let compact = serde_json::to_string(value).expect("JSON values always serialise");
    Sha256::digest(compact.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn positive(field: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Failure::usage(anyhow!("`{field}` must be positive and finite, got {v}")))
    }
}

fn weight(field: String, w: [f64; 2]) -> CliResult<Complex64> {
    if w.iter().all(|c| c.is_finite()) {
        Ok(Complex64::new(w[0], w[1]))
    } else {
        Err(Failure::usage(anyhow!("`{field}` must be finite")))
    }
}

impl Scenario {
    pub fn from_spec(spec: ScenarioSpec, sha256: String) -> CliResult<Self> {
        if spec.version != FORMAT_VERSION {
            return Err(Failure::usage(anyhow!(
                "`version` {} is not supported, expected {FORMAT_VERSION}",
                spec.version
            )));
        }
        if spec.name.trim().is_empty() || spec.name.contains(['/', '\\']) {
            return Err(Failure::usage(anyhow!("`name` must be non-empty and contain no path separators")));
        }
        let mass = positive("particle.mass_kg", spec.particle.mass_kg)?;
        let units = UnitSystem::for_particle(mass).in_context("particle.mass_kg")?;
        let physical = match spec.potential {
            Potential::Free => PhysicalParams { mass, g: 0.0, omega: 0.0 },
            Potential::Gravity { g_m_per_s2 } => {
                if !(g_m_per_s2.is_finite() && g_m_per_s2 >= 0.0) {
                    return Err(Failure::usage(anyhow!(
                        "`potential.gravity.g_m_per_s2` must be non-negative, got {g_m_per_s2}"
                    )));
                }
                PhysicalParams { mass, g: g_m_per_s2, omega: 0.0 }
            }
            Potential::Harmonic { nu_hz } => {
                PhysicalParams { mass, g: 0.0, omega: 2.0 * PI * positive("potential.harmonic.nu_hz", nu_hz)? }
            }
        };
        let harmonic = matches!(spec.potential, Potential::Harmonic { .. });

        let model = match &spec.state {
            StateInput::GaussianSuperposition { sigma_m, branches } => {
                if harmonic {
                    return Err(Failure::usage(anyhow!(
                        "`state.gaussian_superposition` needs a free or gravity potential"
                    )));
                }
                let sigma = units.length_from_si(positive("state.gaussian_superposition.sigma_m", *sigma_m)?);
                let branches = branches
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let field = format!("state.gaussian_superposition.branches[{i}]");
                        let momentum = match b.momentum {
                            MomentumInput::KgMetrePerSecond(p) if p.is_finite() => units.momentum_from_si(p),
                            MomentumInput::Recoils { recoils, lambda_nm } if recoils.is_finite() => {
                                units.recoil_momentum(recoils, positive(&format!("{field}.momentum.lambda_nm"), lambda_nm)? * 1e-9)
                            }
                            _ => return Err(Failure::usage(anyhow!("`{field}.momentum` must be finite"))),
                        };
                        Ok(GaussianBranch { weight: weight(format!("{field}.weight"), b.weight)?, momentum })
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                let spec = GaussianSuperpositionSpec { sigma, branches };
                if physical.g > 0.0 {
                    StateModel::LinearPotential(spec)
                } else {
                    StateModel::FreeGaussian(spec)
                }
            }
            StateInput::CoherentSuperposition { branches } => {
                if !harmonic {
                    return Err(Failure::usage(anyhow!("`state.coherent_superposition` needs a harmonic potential")));
                }
                let branches = branches
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let field = format!("state.coherent_superposition.branches[{i}]");
                        if !(b.alpha.abs.is_finite() && b.alpha.abs >= 0.0 && b.alpha.phase_pi.is_finite()) {
                            return Err(Failure::usage(anyhow!("`{field}.alpha` must be finite with abs >= 0")));
                        }
                        Ok(CoherentBranch { weight: weight(format!("{field}.weight"), b.weight)?, alpha0: b.alpha.value() })
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                StateModel::HarmonicCoherent(CoherentSuperpositionSpec { branches })
            }
        };
        let state = WavefunctionState::new(model, physical).in_context("state")?;
        let precision = PrecisionSpec::gaussian(units.length_from_si(positive("precision.sigma_phi_m", spec.precision.sigma_phi_m)?))
            .in_context("precision")?;

        let q = &spec.query;
        let a = match &q.a_m {
            LevelInput::Metres(a) if a.is_finite() => units.length_from_si(*a),
            LevelInput::Metres(a) => return Err(Failure::usage(anyhow!("`query.a_m` must be finite, got {a}"))),
            LevelInput::AlphaPosition { alpha_position } => {
                if !harmonic {
                    return Err(Failure::usage(anyhow!("`query.a_m.alpha_position` needs a harmonic potential")));
                }
                (2.0 * state.hbar() / (state.mass() * state.omega())).sqrt() * alpha_position.value().re
            }
        };
        let query = DetectionQuery {
            a,
            t_start: units.time_from_si(q.t_start_s),
            t_end: units.time_from_si(q.t_end_s),
            n_times: q.n_times,
            delta_t: units.time_from_si(q.delta_t_s),
        };
        query.validate().in_context("query")?;
        let scenario = Scenario { spec, units, state, precision, query, sha256 };
        if scenario.spec.optimize.is_some() {
            scenario.search_space()?;
        }
        Ok(scenario)
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    /// Family matching the scenario's potential unless overridden.
    pub fn family(&self) -> Family {
        self.spec.optimize.as_ref().and_then(|o| o.family).unwrap_or(match self.spec.potential {
            Potential::Harmonic { .. } => Family::Coherent2Branch,
            _ => Family::Gaussian2Branch,
        })
    }

    /// Indices of the family's parameters that are momenta.
    pub fn momentum_parameters(&self) -> &'static [usize] {
        match self.family() {
            Family::Gaussian2Branch => &[2, 3],
            Family::Coherent2Branch => &[],
        }
    }

    /// Search space built from the scenario and its `optimize` section.
    pub fn search_space(&self) -> CliResult<SearchSpace> {
        let opt = self.spec.optimize.clone().unwrap_or(OptimizeInput {
            family: None,
            objective: ObjectiveKind::default(),
            window: None,
            n_times: None,
            bounds: None,
        });
        let family = self.family();
        let harmonic = matches!(self.spec.potential, Potential::Harmonic { .. });
        if harmonic != (family == Family::Coherent2Branch) {
            return Err(Failure::usage(anyhow!(
                "`optimize.family` does not match the potential: the coherent family needs a harmonic trap"
            )));
        }
        let mut query = self.query;
        if let Some(w) = opt.window {
            query.t_start = self.units.time_from_si(w.t_start_s);
            query.t_end = self.units.time_from_si(w.t_end_s);
        }
        if let Some(n) = opt.n_times {
            query.n_times = n;
        }
        query.validate().in_context("optimize.window")?;
        let sigma = match self.state.model() {
            StateModel::FreeGaussian(s) | StateModel::LinearPotential(s) => s.sigma,
            StateModel::HarmonicCoherent(_) => 1.0,
        };
        let template = SearchTemplate { physical: *self.state.physical(), sigma, precision: self.precision, query };
        let space = match family {
            Family::Gaussian2Branch => SearchSpace::gaussian_two_branch(template),
            Family::Coherent2Branch => SearchSpace::coherent_two_branch(template),
        }
        .in_context("optimize")?
        .with_objective(opt.objective);
        let Some(bounds) = opt.bounds else { return Ok(space) };
        let bounds: Vec<ParamBound> = bounds
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let conv = |v: f64| if self.momentum_parameters().contains(&i) { self.units.momentum_from_si(v) } else { v };
                ParamBound { lower: conv(b[0]), upper: conv(b[1]) }
            })
            .collect();
        SearchSpace::new(family, bounds, space.template).in_context("optimize.bounds").map(|s| s.with_objective(opt.objective))
    }
}
