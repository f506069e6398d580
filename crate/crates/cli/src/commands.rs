//! The subcommands. Each writes its artifacts atomically and returns a summary for the terminal.
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use backflow_core::backflow::{detect, BackflowReport};
use backflow_core::corenum::UnitSystem;
use backflow_core::optimizer::{optimize, state_objective, ObjectiveKind};
use backflow_core::phasespace::{default_grid_with, joint_density};
use backflow_core::transport::{
    is_admissible, position_cells, worst_case_bound_with, CellRule, MarginalPair,
};
use serde::{Deserialize, Serialize};

use crate::io::{read_marginal, write_csv, write_json, P_MARGINAL_HEADER, X_MARGINAL_HEADER};
use crate::manifest::{now_utc, RunManifest};
use crate::scenario::{OutputKind, Scenario};
use crate::{CliResult, CoreContext, Failure};

pub const DETECT_HEADER: [&str; 6] = ["t_us", "j_quantum", "j_classical_bound", "violation", "P_above", "neg_momentum_prob"];
/// Half-width of the exported marginal grids in smoothed standard deviations.
pub const MARGINAL_SIGMAS: f64 = 8.0;

/// Internal time is in microseconds.
fn to_us(units: &UnitSystem, t: f64) -> f64 {
    units.time_to_si(t) * 1e6
}

fn intervals_us(units: &UnitSystem, report: &BackflowReport) -> Vec<[f64; 2]> {
    report.qb_intervals.iter().map(|&(lo, hi)| [to_us(units, lo), to_us(units, hi)]).collect()
}

fn finish(dir: &Path, file: String, mut manifest: RunManifest) -> CliResult<PathBuf> {
    manifest.finished_utc = now_utc();
    let path = dir.join(file);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// One CSV row; currents per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectRow {
    pub t_us: f64,
    pub j_quantum: f64,
    pub j_classical_bound: f64,
    pub violation: f64,
    #[serde(rename = "P_above")]
    pub p_above: f64,
    pub neg_momentum_prob: f64,
}

#[derive(Debug, Clone)]
pub struct DetectOutcome {
    pub report: BackflowReport,
    pub intervals_us: Vec<[f64; 2]>,
    pub files: Vec<PathBuf>,
}

pub fn run_detect(scenario: &Scenario, out_dir: &Path) -> CliResult<DetectOutcome> {
    let mut manifest = RunManifest::start("detect", Some(scenario.name()), vec![scenario.sha256.clone()]);
    let report = detect(&scenario.state, &scenario.precision, &scenario.query)
        .in_context(format!("detection for scenario `{}`", scenario.name()))?;
    let u = &scenario.units;
    let mut files = Vec::new();
    let outputs = &scenario.spec.outputs;
    if outputs.contains(&OutputKind::ReportCsv) {
        let rows: Vec<DetectRow> = (0..report.times.len())
            .map(|i| DetectRow {
                t_us: to_us(u, report.times[i]),
                j_quantum: u.current_to_si(report.j_quantum[i]),
                j_classical_bound: u.current_to_si(report.j_classical_bound[i]),
                violation: u.current_to_si(report.violation[i]),
                p_above: report.p_above[i],
                neg_momentum_prob: report.neg_momentum_prob[i],
            })
            .collect();
        let name = format!("{}_detect.csv", scenario.name());
        write_csv(&out_dir.join(&name), &DETECT_HEADER, &rows)?;
        files.push(name);
    }
    if outputs.contains(&OutputKind::ReportJson) {
        let name = format!("{}_detect.json", scenario.name());
        write_json(&out_dir.join(&name), &report)?;
        files.push(name);
    }
    let intervals = intervals_us(u, &report);
    manifest.qb_intervals_us = Some(intervals.clone());
    manifest.outputs = files.clone();
    let mut paths: Vec<PathBuf> = files.iter().map(|f| out_dir.join(f)).collect();
    paths.push(finish(out_dir, format!("{}_detect_manifest.json", scenario.name()), manifest)?);
    Ok(DetectOutcome { report, intervals_us: intervals, files: paths })
}

/// Worst-case coupling report in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub a_m: f64,
    pub dt_s: f64,
    pub mass_kg: f64,
    pub cell_rule: CellRule,
    pub max_strip_mass: f64,
    /// Position mass below `a` plus the strip mass.
    pub bound_value: f64,
    pub certificate: CertificateReport,
}

/// Minimum cut: the position cells on the sink side and the momentum cells on the source side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub cut_x_cells_m: Vec<[f64; 2]>,
    pub cut_p_kg_m_per_s: Vec<f64>,
    pub capacity: f64,
    /// Capacity recomputed from the marginals after checking that the cut separates every
    /// admissible pair.
    pub verified_capacity: f64,
}

pub struct TransportArgs<'a> {
    pub x_csv: &'a Path,
    pub p_csv: &'a Path,
    pub a_m: f64,
    pub dt_s: f64,
    pub mass_kg: f64,
    pub rule: CellRule,
}

pub fn run_transport(args: &TransportArgs, out_dir: Option<&Path>) -> CliResult<TransportReport> {
    let (x_si, xd_si, x_hash) = read_marginal(args.x_csv, X_MARGINAL_HEADER)?;
    let (p_si, pd_si, p_hash) = read_marginal(args.p_csv, P_MARGINAL_HEADER)?;
    let mut manifest = RunManifest::start("transport", None, vec![x_hash, p_hash]);
    if !(args.mass_kg.is_finite() && args.mass_kg > 0.0) {
        return Err(Failure::usage(anyhow!("--mass must be positive, got {}", args.mass_kg)));
    }
    let u = UnitSystem::for_particle(args.mass_kg).in_context("--mass")?;
    let (l, q) = (u.length_to_si(1.0), u.momentum_to_si(1.0));
    let x: Vec<f64> = x_si.iter().map(|v| u.length_from_si(*v)).collect();
    let p: Vec<f64> = p_si.iter().map(|v| u.momentum_from_si(*v)).collect();
    let pair = MarginalPair::from_samples(
        &x,
        xd_si.iter().map(|d| d * l).collect(),
        &p,
        pd_si.iter().map(|d| d * q).collect(),
    )
    .in_context("marginal files")?;
    let (a, dt) = (u.length_from_si(args.a_m), u.time_from_si(args.dt_s));
    let bound = worst_case_bound_with(&pair, a, dt, 1.0, args.rule).in_context("worst-case coupling")?;

    let cells = position_cells(&pair, a, dt, 1.0, args.rule);
    let cell_masses: Vec<f64> = cells.iter().map(|c| c.mass).collect();
    let verified = bound
        .certificate
        .verify(&cell_masses, &pair.p_masses(), |i, j| is_admissible(&cells[i], p[j], a, dt, 1.0, args.rule))
        .in_context("cut certificate")?;
    let report = TransportReport {
        a_m: args.a_m,
        dt_s: args.dt_s,
        mass_kg: args.mass_kg,
        cell_rule: args.rule,
        max_strip_mass: bound.max_strip_mass,
        bound_value: bound.bound_value,
        certificate: CertificateReport {
            cut_x_cells_m: bound.certificate.cut_x.iter().map(|&i| [cells[i].lo * l, cells[i].hi * l]).collect(),
            cut_p_kg_m_per_s: bound.certificate.cut_p.iter().map(|&j| p_si[j]).collect(),
            capacity: bound.certificate.capacity,
            verified_capacity: verified,
        },
    };
    if let Some(dir) = out_dir {
        write_json(&dir.join("transport.json"), &report)?;
        manifest.outputs = vec!["transport.json".into()];
        finish(dir, "transport_manifest.json".into(), manifest)?;
    }
    Ok(report)
}

/// Optimisation result in SI units: momenta in kg·m/s, objectives per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub scenario: String,
    pub family: backflow_core::optimizer::Family,
    pub objective_kind: ObjectiveKind,
    pub parameter_names: Vec<String>,
    pub window_us: [f64; 2],
    pub budget: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub qb_found: bool,
    pub best_params: Vec<f64>,
    pub best_objective_per_s: f64,
    /// Objective of the scenario's own state over the same window.
    pub scenario_objective_per_s: f64,
    /// Backflow intervals of the best state within the search window.
    pub best_intervals_us: Vec<[f64; 2]>,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub params: Vec<f64>,
    pub objective_per_s: f64,
}

pub fn run_optimize(scenario: &Scenario, budget: usize, seed: u64, out_dir: &Path) -> CliResult<OptimizeReport> {
    let mut manifest = RunManifest::start("optimize", Some(scenario.name()), vec![scenario.sha256.clone()]);
    let space = scenario.search_space()?;
    let context = format!("optimisation for scenario `{}`", scenario.name());
    let result = optimize(&space, budget, seed).in_context(&context)?;
    let u = &scenario.units;
    let t = &space.template;
    // integrated objectives are dimensionless, peaks are currents
    let per_s = |v: f64| match space.objective {
        ObjectiveKind::PeakViolation => u.current_to_si(v),
        ObjectiveKind::IntegratedViolation => v,
    };
    let momenta = scenario.momentum_parameters();
    let to_si = |params: &[f64]| -> Vec<f64> {
        params
            .iter()
            .enumerate()
            .map(|(i, v)| if momenta.contains(&i) { u.momentum_to_si(*v) } else { *v })
            .collect()
    };
    let scenario_objective = state_objective(&scenario.state, &t.precision, &t.query, space.objective).in_context(&context)?;
    let best_state = space.state(&result.best_params).in_context(&context)?;
    let best_report = detect(&best_state, &t.precision, &t.query).in_context(&context)?;
    let report = OptimizeReport {
        scenario: scenario.name().to_string(),
        family: space.family,
        objective_kind: space.objective,
        parameter_names: space.family.parameter_names().iter().map(|s| s.to_string()).collect(),
        window_us: [to_us(u, t.query.t_start), to_us(u, t.query.t_end)],
        budget,
        seed,
        evaluations: result.evaluations,
        qb_found: result.qb_found,
        best_params: to_si(&result.best_params),
        best_objective_per_s: per_s(result.best_objective),
        scenario_objective_per_s: per_s(scenario_objective),
        best_intervals_us: intervals_us(u, &best_report),
        trace: result
            .trace
            .iter()
            .map(|e| TracePoint { params: to_si(&e.params), objective_per_s: per_s(e.objective) })
            .collect(),
    };
    let name = format!("{}_optimize.json", scenario.name());
    write_json(&out_dir.join(&name), &report)?;
    manifest.outputs = vec![name];
    manifest.qb_intervals_us = Some(report.best_intervals_us.clone());
    finish(out_dir, format!("{}_optimize_manifest.json", scenario.name()), manifest)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XRow {
    pub x_m: f64,
    pub density_per_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRow {
    pub p_kg_m_per_s: f64,
    pub density_per_kg_m_per_s: f64,
}

/// Writes the smoothed position and momentum marginals at time `t_s` on grids of `cells`
/// nodes spanning the mean ± 8 smoothed standard deviations. Returns the two CSV paths.
pub fn run_export_marginals(scenario: &Scenario, t_s: f64, cells: usize, out_dir: &Path) -> CliResult<[PathBuf; 2]> {
    if !(t_s.is_finite() && t_s >= 0.0) {
        return Err(Failure::usage(anyhow!("--t must be a non-negative time in seconds, got {t_s}")));
    }
    let mut manifest = RunManifest::start("export-marginals", Some(scenario.name()), vec![scenario.sha256.clone()]);
    let u = &scenario.units;
    let t = u.time_from_si(t_s);
    let context = format!("marginals of scenario `{}` at t = {t_s} s", scenario.name());
    let pair = marginal_pair(scenario, t, cells).in_context(&context)?;
    let (l, q) = (u.length_to_si(1.0), u.momentum_to_si(1.0));
    let xs: Vec<XRow> = pair
        .x_grid()
        .points()
        .iter()
        .zip(pair.x_density())
        .map(|(x, d)| XRow { x_m: x * l, density_per_m: d / l })
        .collect();
    let ps: Vec<PRow> = pair
        .p_grid()
        .points()
        .iter()
        .zip(pair.p_density())
        .map(|(p, d)| PRow { p_kg_m_per_s: p * q, density_per_kg_m_per_s: d / q })
        .collect();
    let names = [format!("{}_x_marginal.csv", scenario.name()), format!("{}_p_marginal.csv", scenario.name())];
    write_csv(&out_dir.join(&names[0]), &X_MARGINAL_HEADER, &xs)?;
    write_csv(&out_dir.join(&names[1]), &P_MARGINAL_HEADER, &ps)?;
    manifest.outputs = names.to_vec();
    finish(out_dir, format!("{}_marginals_manifest.json", scenario.name()), manifest)?;
    Ok(names.map(|n| out_dir.join(n)))
}

/// Marginals of the smoothed joint density on the export grid, internal units.
pub fn marginal_pair(scenario: &Scenario, t: f64, cells: usize) -> backflow_core::Result<MarginalPair> {
    let grid = default_grid_with(&scenario.state, &scenario.precision, t, cells, MARGINAL_SIGMAS)?;
    MarginalPair::from_joint(&joint_density(&scenario.state, &scenario.precision, &grid, t)?)
}
