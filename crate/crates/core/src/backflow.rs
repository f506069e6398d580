//! Quantum probability current, the classical lower bound obtained from the finite-precision
//! joint density, and detection of the intervals where the quantum current beats it.
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corenum::{adaptive_integrate_real, integrate_linear_between};
use crate::error::{Error, Result};
use crate::phasespace::{negative_momentum_moment, position_marginal, JointDensity, PrecisionSpec};
use crate::states::{sum_derivative, sum_eval, sum_support, WavefunctionState};

/// A violation must exceed this many internal current units to count as backflow.
pub const VIOLATION_FLOOR: f64 = 1e-12;
/// Interval endpoints are bisected down to this fraction of the scan step.
pub const ENDPOINT_RESOLUTION: f64 = 1e-3;
pub const DEFAULT_SCAN_POINTS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionQuery {
    /// Detection level `x = a`.
    pub a: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub n_times: usize,
    /// Short classical horizon used by the probability bound.
    pub delta_t: f64,
}

impl DetectionQuery {
    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() {
            return Err(Error::invalid("detection level must be finite"));
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_start >= 0.0 && self.t_start < self.t_end)
        {
            return Err(Error::invalid(format!(
                "time window must satisfy 0 <= t_start < t_end, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if self.n_times < 2 {
            return Err(Error::invalid(format!("n_times must be at least 2, got {}", self.n_times)));
        }
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return Err(Error::invalid(format!("delta_t must be positive, got {}", self.delta_t)));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let step = (self.t_end - self.t_start) / (self.n_times - 1) as f64;
        (0..self.n_times)
            .map(|i| if i + 1 == self.n_times { self.t_end } else { self.t_start + i as f64 * step })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackflowReport {
    pub times: Vec<f64>,
    pub j_quantum: Vec<f64>,
    pub j_classical_bound: Vec<f64>,
    /// `max(bound - j, 0)`
    pub violation: Vec<f64>,
    pub qb_intervals: Vec<(f64, f64)>,
    /// `∫_{-∞}^0 |ψ̃_t|² dp`
    pub neg_momentum_prob: Vec<f64>,
    /// `P_t(x ≤ a)`
    pub p_above: Vec<f64>,
}

impl BackflowReport {
    pub fn peak_violation(&self) -> f64 {
        self.violation.iter().cloned().fold(0.0, f64::max)
    }

    /// `∫ (bound - j)₊ dt` by the trapezoid rule on the scan.
    pub fn integrated_violation(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.violation.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
            .sum()
    }
}

/// `j_t(a) = (ħ/m) Im(ψ* ∂ψ/∂x)` at `x = a`.
pub fn quantum_current(state: &WavefunctionState, a: f64, t: f64) -> Result<f64> {
    let terms = state.terms(t)?;
    let psi = sum_eval(&terms, a);
    let dpsi = sum_derivative(&terms, a);
    Ok(state.hbar() / state.mass() * (psi.conj() * dpsi).im)
}

/// Lower bound `(1/m) ∫_{-∞}^0 p f_t(a, p) dp` on any classical current compatible with `f_t`.
pub fn classical_bound(state: &WavefunctionState, precision: &PrecisionSpec, a: f64, t: f64) -> Result<f64> {
    negative_momentum_moment(state, precision, a, t)
}

/// `P_t(x ≤ a)`.
pub fn cumulative_probability(state: &WavefunctionState, a: f64, t: f64) -> Result<f64> {
    let terms = state.terms(t)?;
    let (lo, hi) = sum_support(&terms);
    if a <= lo {
        return Ok(0.0);
    }
    let v = adaptive_integrate_real(|x| sum_eval(&terms, x).norm_sqr(), lo, a.min(hi), 1e-13)?;
    Ok(v.clamp(0.0, 1.0))
}

struct Sample {
    j: f64,
    bound: f64,
    neg: f64,
    p_above: f64,
}

fn sample(state: &WavefunctionState, precision: &PrecisionSpec, a: f64, t: f64) -> Result<Sample> {
    Ok(Sample {
        j: quantum_current(state, a, t)?,
        bound: classical_bound(state, precision, a, t)?,
        neg: state.negative_momentum_probability(t)?,
        p_above: cumulative_probability(state, a, t)?,
    })
}

fn margin(state: &WavefunctionState, precision: &PrecisionSpec, a: f64, t: f64) -> Result<f64> {
    Ok(classical_bound(state, precision, a, t)? - quantum_current(state, a, t)? - VIOLATION_FLOOR)
}

/// Locates the sign change of the violation margin inside `[lo, hi]`.
fn bisect(
    state: &WavefunctionState,
    precision: &PrecisionSpec,
    a: f64,
    mut lo: f64,
    mut hi: f64,
    resolution: f64,
) -> Result<f64> {
    let lo_inside = margin(state, precision, a, lo)? > 0.0;
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if (margin(state, precision, a, mid)? > 0.0) == lo_inside {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Scans the query window and reports where `j_t(a) < (1/m) ∫_{-∞}^0 p f_t(a,p) dp`.
pub fn detect(state: &WavefunctionState, precision: &PrecisionSpec, query: &DetectionQuery) -> Result<BackflowReport> {
    query.validate()?;
    precision.validate()?;
    let times = query.times();
    let samples: Vec<Sample> = times
        .par_iter()
        .map(|&t| sample(state, precision, query.a, t))
        .collect::<Result<_>>()?;

    let flags: Vec<bool> = samples.iter().map(|s| s.bound - s.j > VIOLATION_FLOOR).collect();
    let step = times[1] - times[0];
    let resolution = ENDPOINT_RESOLUTION * step;
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, flags.len() - 1));
    }
    let qb_intervals = runs
        .par_iter()
        .map(|&(s, e)| {
            let lo = if s == 0 {
                times[0]
            } else {
                bisect(state, precision, query.a, times[s - 1], times[s], resolution)?
            };
            let hi = if e + 1 == times.len() {
                times[e]
            } else {
                bisect(state, precision, query.a, times[e], times[e + 1], resolution)?
            };
            Ok((lo, hi))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BackflowReport {
        violation: samples.iter().map(|s| (s.bound - s.j).max(0.0)).collect(),
        j_quantum: samples.iter().map(|s| s.j).collect(),
        j_classical_bound: samples.iter().map(|s| s.bound).collect(),
        neg_momentum_prob: samples.iter().map(|s| s.neg).collect(),
        p_above: samples.iter().map(|s| s.p_above).collect(),
        times,
        qb_intervals,
    })
}

/// `bound - j` at every scan time, without the auxiliary columns of [`detect`].
pub fn violation_profile(state: &WavefunctionState, precision: &PrecisionSpec, query: &DetectionQuery) -> Result<Vec<f64>> {
    query.validate()?;
    precision.validate()?;
    query
        .times()
        .par_iter()
        .map(|&t| Ok(classical_bound(state, precision, query.a, t)? - quantum_current(state, query.a, t)?))
        .collect()
}

/// Classical upper bound on `P(x(t + Δt) ≤ a)`: the smoothed `P(x ≤ a)` plus [`strip_mass`].
pub fn probability_upper_bound(jd: &JointDensity, a: f64, delta_t: f64, mass: f64) -> Result<f64> {
    let strip = strip_mass(jd, a, delta_t, mass)?;
    let xg = &jd.grid.x;
    Ok(integrate_linear_between(&position_marginal(jd)?, xg, xg.lo(), a)? + strip)
}

/// Mass of the joint density in the strip `{p < 0, a ≤ x ≤ a + |p|Δt/m}`: the most probability
/// a classical ensemble with this density can move to `x ≤ a` within `Δt`.
pub fn strip_mass(jd: &JointDensity, a: f64, delta_t: f64, mass: f64) -> Result<f64> {
    if !(delta_t.is_finite() && delta_t >= 0.0) {
        return Err(Error::invalid(format!("delta_t must be non-negative, got {delta_t}")));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::invalid(format!("mass must be positive, got {mass}")));
    }
    if delta_t == 0.0 {
        return Ok(0.0);
    }
    let xg = &jd.grid.x;
    let pg = &jd.grid.p;
    let peak = jd.peak();
    let nx = xg.len();
    let mut strip = vec![0.0; pg.len()];
    for (ip, p) in pg.points().into_iter().enumerate() {
        if p >= 0.0 {
            continue;
        }
        let column: Vec<f64> = (0..nx).map(|ix| jd.at(ix, ip)).collect();
        let reach = a + p.abs() * delta_t / mass;
        if reach > xg.hi() && column.iter().cloned().fold(0.0, f64::max) > 1e-10 * peak {
            return Err(Error::GridTooNarrow(format!(
                "strip reaches x = {reach} beyond grid edge {}; widen the position grid",
                xg.hi()
            )));
        }
        strip[ip] = integrate_linear_between(&column, xg, a, reach)?;
    }
    integrate_linear_between(&strip, pg, pg.lo(), 0.0)
}
