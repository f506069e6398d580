//! Run manifests: what was run, on which input, and which files came out.
use backflow_core::backflow::{ENDPOINT_RESOLUTION, VIOLATION_FLOOR};
use backflow_core::transport::{MARGINAL_TOLERANCE, MASS_TOLERANCE};
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_name: Option<String>,
    /// SHA-256 of the canonical scenario JSON, or of each input file for commands without one.
    pub input_sha256: Vec<String>,
    pub started_utc: String,
    pub finished_utc: String,
    pub threads: usize,
    /// File names relative to the manifest's directory, the manifest itself excluded.
    pub outputs: Vec<String>,
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qb_intervals_us: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub violation_floor_per_us: f64,
    pub endpoint_resolution_of_step: f64,
    pub bound_quadrature_rel_tol: f64,
    pub marginal_mass_tolerance: f64,
    pub marginal_match_tolerance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            violation_floor_per_us: VIOLATION_FLOOR,
            endpoint_resolution_of_step: ENDPOINT_RESOLUTION,
            bound_quadrature_rel_tol: 1e-9,
            marginal_mass_tolerance: MASS_TOLERANCE,
            marginal_match_tolerance: MARGINAL_TOLERANCE,
        }
    }
}

pub fn now_utc() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, scenario_name: Option<&str>, input_sha256: Vec<String>) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario_name: scenario_name.map(str::to_string),
            input_sha256,
            started_utc: now_utc(),
            finished_utc: String::new(),
            threads: rayon::current_num_threads(),
            outputs: Vec::new(),
            tolerances: Tolerances::default(),
            qb_intervals_us: None,
        }
    }
}
