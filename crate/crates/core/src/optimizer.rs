//! Derivative-free search for two-branch states with the strongest backflow.
//!
//! A seeded Latin-hypercube batch (evaluated in parallel) is followed by a bounded Nelder–Mead
//! simplex (sequential) started from the best seeds. Everything is driven by a ChaCha stream,
//! and parallel batches are reduced in index order, so a given seed always yields the same trace.
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backflow::{violation_profile, DetectionQuery};
use crate::error::{Error, Result};
use crate::phasespace::PrecisionSpec;
use crate::states::{
    CoherentBranch, CoherentSuperpositionSpec, GaussianBranch, GaussianSuperpositionSpec, PhysicalParams,
    StateModel, WavefunctionState,
};

pub const MIN_BUDGET: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Parameters: log10 of the second weight relative to the first, relative phase,
    /// first and second branch momenta (internal units).
    Gaussian2Branch,
    /// Parameters: log10 weight ratio, relative phase, |α|, arg α, |β|, arg β.
    Coherent2Branch,
}

impl Family {
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            Family::Gaussian2Branch => &["log10_weight_ratio", "relative_phase", "momentum_1", "momentum_2"],
            Family::Coherent2Branch => &[
                "log10_weight_ratio",
                "relative_phase",
                "alpha_abs",
                "alpha_arg",
                "beta_abs",
                "beta_arg",
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// `max_t (bound - j)`
    #[default]
    PeakViolation,
    /// `∫ (bound - j)₊ dt`
    IntegratedViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBound {
    pub lower: f64,
    pub upper: f64,
}

/// Everything held fixed during a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTemplate {
    pub physical: PhysicalParams,
    /// Branch width for the Gaussian family (internal length); ignored for coherent states.
    pub sigma: f64,
    pub precision: PrecisionSpec,
    pub query: DetectionQuery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub family: Family,
    pub bounds: Vec<ParamBound>,
    pub template: SearchTemplate,
    #[serde(default)]
    pub objective: ObjectiveKind,
}

impl SearchSpace {
    /// Gaussian family with momenta up to four photon recoils at 780 nm.
    pub fn gaussian_two_branch(template: SearchTemplate) -> Result<Self> {
        let recoil = 2.0 * PI * crate::corenum::UnitSystem::for_particle(template.physical.mass)?.hbar() / 0.78;
        SearchSpace::new(
            Family::Gaussian2Branch,
            vec![
                ParamBound { lower: -3.0, upper: 1.0 },
                ParamBound { lower: -PI, upper: PI },
                ParamBound { lower: -2.0 * recoil, upper: 2.0 * recoil },
                ParamBound { lower: 0.0, upper: 4.0 * recoil },
            ],
            template,
        )
    }

    pub fn coherent_two_branch(template: SearchTemplate) -> Result<Self> {
        SearchSpace::new(
            Family::Coherent2Branch,
            vec![
                ParamBound { lower: -2.0, upper: 2.0 },
                ParamBound { lower: -PI, upper: PI },
                ParamBound { lower: 0.0, upper: 12.0 },
                ParamBound { lower: -PI, upper: PI },
                ParamBound { lower: 0.0, upper: 12.0 },
                ParamBound { lower: -PI, upper: PI },
            ],
            template,
        )
    }

    pub fn new(family: Family, bounds: Vec<ParamBound>, template: SearchTemplate) -> Result<Self> {
        let space = SearchSpace { family, bounds, template, objective: ObjectiveKind::default() };
        space.validate()?;
        Ok(space)
    }

    pub fn with_objective(mut self, objective: ObjectiveKind) -> Self {
        self.objective = objective;
        self
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.family.parameter_names();
        if self.bounds.len() != names.len() {
            return Err(Error::LengthMismatch { expected: names.len(), got: self.bounds.len() });
        }
        for (name, b) in names.iter().zip(&self.bounds) {
            if !(b.lower.is_finite() && b.upper.is_finite() && b.lower < b.upper) {
                return Err(Error::invalid(format!(
                    "bounds for {name} must be finite with lower < upper, got [{}, {}]",
                    b.lower, b.upper
                )));
            }
        }
        self.template.physical.validate()?;
        self.template.precision.validate()?;
        self.template.query.validate()?;
        if self.family == Family::Gaussian2Branch && !(self.template.sigma.is_finite() && self.template.sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive for the Gaussian family"));
        }
        Ok(())
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.bounds.len() {
            return Err(Error::LengthMismatch { expected: self.bounds.len(), got: params.len() });
        }
        for ((name, b), v) in self.family.parameter_names().iter().zip(&self.bounds).zip(params) {
            if !(v.is_finite() && *v >= b.lower && *v <= b.upper) {
                return Err(Error::invalid(format!("{name} = {v} outside [{}, {}]", b.lower, b.upper)));
            }
        }
        Ok(())
    }

    /// The state described by `params`, which need not lie inside the bounds.
    pub fn state(&self, params: &[f64]) -> Result<WavefunctionState> {
        if params.len() != self.bounds.len() {
            return Err(Error::LengthMismatch { expected: self.bounds.len(), got: params.len() });
        }
        let second = Complex64::from_polar(10f64.powf(params[0]), params[1]);
        let first = Complex64::new(1.0, 0.0);
        let model = match self.family {
            Family::Gaussian2Branch => {
                let spec = GaussianSuperpositionSpec {
                    sigma: self.template.sigma,
                    branches: vec![
                        GaussianBranch { weight: first, momentum: params[2] },
                        GaussianBranch { weight: second, momentum: params[3] },
                    ],
                };
                if self.template.physical.g == 0.0 {
                    StateModel::FreeGaussian(spec)
                } else {
                    StateModel::LinearPotential(spec)
                }
            }
            Family::Coherent2Branch => StateModel::HarmonicCoherent(CoherentSuperpositionSpec {
                branches: vec![
                    CoherentBranch { weight: first, alpha0: Complex64::from_polar(params[2], params[3]) },
                    CoherentBranch { weight: second, alpha0: Complex64::from_polar(params[4], params[5]) },
                ],
            }),
        };
        WavefunctionState::new(model, self.template.physical)
    }
}

/// Objective value of an arbitrary state under the given precision and scan.
pub fn state_objective(
    state: &WavefunctionState,
    precision: &PrecisionSpec,
    query: &DetectionQuery,
    kind: ObjectiveKind,
) -> Result<f64> {
    let margins = violation_profile(state, precision, query)?;
    Ok(match kind {
        ObjectiveKind::PeakViolation => margins.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ObjectiveKind::IntegratedViolation => {
            let times = query.times();
            times
                .windows(2)
                .zip(margins.windows(2))
                .map(|(t, m)| 0.5 * (t[1] - t[0]) * (m[0].max(0.0) + m[1].max(0.0)))
                .sum()
        }
    })
}

/// Objective at `params`, which must lie inside the bounds. Positive means backflow is present.
pub fn objective(space: &SearchSpace, params: &[f64]) -> Result<f64> {
    space.check_params(params)?;
    let t = &space.template;
    state_objective(&space.state(params)?, &t.precision, &t.query, space.objective)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub params: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_params: Vec<f64>,
    pub best_objective: f64,
    pub trace: Vec<TraceEntry>,
    pub evaluations: usize,
    /// False when no evaluated point showed backflow.
    pub qb_found: bool,
}

type Objective<'a> = &'a (dyn Fn(&[f64]) -> Result<f64> + Sync);

struct Evaluator<'a> {
    bounds: &'a [ParamBound],
    f: Objective<'a>,
    trace: Vec<TraceEntry>,
    budget: usize,
}

impl Evaluator<'_> {
    fn remaining(&self) -> usize {
        self.budget - self.trace.len()
    }

    fn to_params(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.bounds)
            .map(|(u, b)| b.lower + u.clamp(0.0, 1.0) * (b.upper - b.lower))
            .collect()
    }

    fn batch(&mut self, units: &[Vec<f64>]) -> Result<Vec<f64>> {
        let params: Vec<Vec<f64>> = units.iter().map(|u| self.to_params(u)).collect();
        let values = params.par_iter().map(|p| (self.f)(p)).collect::<Result<Vec<_>>>()?;
        for (p, v) in params.into_iter().zip(&values) {
            self.trace.push(TraceEntry { params: p, objective: *v });
        }
        Ok(values)
    }

    fn single(&mut self, unit: &[f64]) -> Result<f64> {
        Ok(self.batch(&[unit.to_vec()])?[0])
    }
}

fn latin_hypercube(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (point, s) in points.iter_mut().zip(strata) {
            point[d] = (s as f64 + rng.gen::<f64>()) / n as f64;
        }
    }
    points
}

/// Bounded Nelder–Mead maximisation in the unit cube; returns when the simplex collapses or
/// the budget is spent.
fn nelder_mead(eval: &mut Evaluator, start: &[f64], start_value: f64, step: f64) -> Result<()> {
    let dim = start.len();
    let clamp = |v: Vec<f64>| v.into_iter().map(|c| c.clamp(0.0, 1.0)).collect::<Vec<_>>();
    // stored as (point, -objective) so that the usual minimisation form applies
    let mut simplex = vec![(start.to_vec(), -start_value)];
    for d in 0..dim {
        if eval.remaining() == 0 {
            return Ok(());
        }
        let mut v = start.to_vec();
        v[d] = if v[d] + step <= 1.0 { v[d] + step } else { v[d] - step };
        let f = -eval.single(&v)?;
        simplex.push((v, f));
    }
    while eval.remaining() > 0 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = (1..=dim)
            .map(|k| simplex[k].0.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread < 1e-7 {
            return Ok(());
        }
        let centroid: Vec<f64> =
            (0..dim).map(|d| simplex[..dim].iter().map(|(p, _)| p[d]).sum::<f64>() / dim as f64).collect();
        let worst = simplex[dim].clone();
        let along = |coef: f64| clamp(centroid.iter().zip(&worst.0).map(|(c, w)| c + coef * (c - w)).collect());
        let reflected = along(1.0);
        let fr = -eval.single(&reflected)?;
        if fr < simplex[0].1 {
            if eval.remaining() == 0 {
                simplex[dim] = (reflected, fr);
                break;
            }
            let expanded = along(2.0);
            let fe = -eval.single(&expanded)?;
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            if eval.remaining() == 0 {
                break;
            }
            let contracted = if fr < worst.1 { along(0.5) } else { along(-0.5) };
            let fc = -eval.single(&contracted)?;
            if fc < worst.1.min(fr) {
                simplex[dim] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for k in 1..=dim {
                    if eval.remaining() == 0 {
                        return Ok(());
                    }
                    let shrunk: Vec<f64> = best.iter().zip(&simplex[k].0).map(|(b, p)| b + 0.5 * (p - b)).collect();
                    let fs = -eval.single(&shrunk)?;
                    simplex[k] = (shrunk, fs);
                }
            }
        }
    }
    Ok(())
}

/// Searches the family for the state with the largest objective using at most `budget`
/// evaluations.
pub fn optimize(space: &SearchSpace, budget: usize, seed: u64) -> Result<OptResult> {
    space.validate()?;
    search(&space.bounds, &|p: &[f64]| objective(space, p), budget, seed)
}

/// Maximises `f` over the box `bounds`.
pub fn search(bounds: &[ParamBound], f: Objective, budget: usize, seed: u64) -> Result<OptResult> {
    if budget < MIN_BUDGET {
        return Err(Error::invalid(format!("budget must be at least {MIN_BUDGET}, got {budget}")));
    }
    if bounds.is_empty() {
        return Err(Error::invalid("search space has no parameters"));
    }
    let dim = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = latin_hypercube((budget / 4).max(2 * dim + 2), dim, &mut rng);
    let mut eval = Evaluator { bounds, f, trace: Vec::with_capacity(budget), budget };
    let values = eval.batch(&seeds)?;

    let mut order: Vec<usize> = (0..seeds.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    // the incumbent is refined with an ever tighter simplex, interleaved with fresh starts
    // from the next best seeds
    let mut step = 0.1;
    let mut next_seed = 1;
    while eval.remaining() > 0 {
        let best = best_entry(&eval.trace).clone();
        let unit: Vec<f64> =
            best.params.iter().zip(bounds).map(|(p, b)| (p - b.lower) / (b.upper - b.lower)).collect();
        nelder_mead(&mut eval, &unit, best.objective, step)?;
        step = (step * 0.5).max(1e-4);
        if eval.remaining() > 0 && next_seed < order.len() {
            let i = order[next_seed];
            next_seed += 1;
            nelder_mead(&mut eval, &seeds[i], values[i], 0.1)?;
        }
    }

    let best = best_entry(&eval.trace).clone();
    Ok(OptResult {
        best_params: best.params,
        best_objective: best.objective,
        qb_found: best.objective > 0.0,
        evaluations: eval.trace.len(),
        trace: eval.trace,
    })
}

/// First entry attaining the maximum objective.
fn best_entry(trace: &[TraceEntry]) -> &TraceEntry {
    trace
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.objective.total_cmp(&b.1.objective).then(b.0.cmp(&a.0)))
        .map(|(_, e)| e)
        .expect("trace is non-empty")
}
