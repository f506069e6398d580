//! Worst-case classical strip mass when only the position and momentum marginals are known.
//!
//! Both marginals are discretised into cell masses (trapezoid weights on their grids). A cell
//! pair `(x_i, p_j)` is admissible when `p_j < 0` and `a ≤ x_i ≤ a + |p_j|Δt/m`. Under the
//! default [`CellRule::Center`] this is judged at the nodes, which carries an O(grid spacing)
//! discretisation error and is blind to strips narrower than a cell. [`CellRule::Split`] instead
//! cuts every position cell at all strip edges, spreading its mass uniformly, so strips of any
//! width are resolved. Either way maximising the admissible mass over all couplings of the two
//! marginals is a transportation problem with 0/1 costs, which is solved exactly as a maximum
//! flow; the minimum cut is returned as proof.
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::corenum::{integrate_1d, Grid1D};
use crate::error::{Error, Result};
use crate::phasespace::{momentum_marginal, position_marginal, JointDensity};

/// Allowed deviation of each marginal's total mass from one, and of the two totals from each other.
pub const MASS_TOLERANCE: f64 = 1e-6;
/// Allowed pointwise deviation between a joint density's marginals and a supplied pair.
pub const MARGINAL_TOLERANCE: f64 = 1e-5;
pub const DEFAULT_MARGINAL_CELLS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalPair {
    x_grid: Grid1D,
    x_density: Vec<f64>,
    p_grid: Grid1D,
    p_density: Vec<f64>,
}

impl MarginalPair {
    pub fn new(x_grid: Grid1D, x_density: Vec<f64>, p_grid: Grid1D, p_density: Vec<f64>) -> Result<Self> {
        for (name, grid, density) in [("position", &x_grid, &x_density), ("momentum", &p_grid, &p_density)] {
            if density.len() != grid.len() {
                return Err(Error::LengthMismatch { expected: grid.len(), got: density.len() });
            }
            if let Some(v) = density.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::invalid(format!("{name} density must be finite and non-negative, found {v}")));
            }
            let total = integrate_1d(density, grid)?;
            if (total - 1.0).abs() > MASS_TOLERANCE {
                return Err(Error::InfeasibleMarginals(format!(
                    "{name} marginal integrates to {total}, expected 1 within {MASS_TOLERANCE}"
                )));
            }
        }
        Ok(MarginalPair { x_grid, x_density, p_grid, p_density })
    }

    /// Builds a pair from sampled `(coordinate, density)` columns; the coordinates must be uniform.
    pub fn from_samples(x: &[f64], x_density: Vec<f64>, p: &[f64], p_density: Vec<f64>) -> Result<Self> {
        MarginalPair::new(uniform_grid(x, "position")?, x_density, uniform_grid(p, "momentum")?, p_density)
    }

    /// The marginals of a joint density on its own grid.
    pub fn from_joint(jd: &JointDensity) -> Result<Self> {
        MarginalPair::new(jd.grid.x, position_marginal(jd)?, jd.grid.p, momentum_marginal(jd)?)
    }

    pub fn x_grid(&self) -> &Grid1D {
        &self.x_grid
    }

    pub fn p_grid(&self) -> &Grid1D {
        &self.p_grid
    }

    pub fn x_density(&self) -> &[f64] {
        &self.x_density
    }

    pub fn p_density(&self) -> &[f64] {
        &self.p_density
    }

    pub fn x_masses(&self) -> Vec<f64> {
        cell_masses(&self.x_density, &self.x_grid)
    }

    pub fn p_masses(&self) -> Vec<f64> {
        cell_masses(&self.p_density, &self.p_grid)
    }
}

fn uniform_grid(coords: &[f64], name: &str) -> Result<Grid1D> {
    if coords.len() < 2 {
        return Err(Error::invalid(format!("{name} marginal needs at least two samples")));
    }
    let grid = Grid1D::new(coords[0], coords[coords.len() - 1], coords.len())?;
    let tol = 1e-6 * grid.spacing();
    if let Some((i, c)) = coords.iter().enumerate().find(|(i, c)| (grid.point(*i) - **c).abs() > tol) {
        return Err(Error::invalid(format!(
            "{name} coordinates must be uniformly spaced and increasing; sample {i} is {c}, expected {}",
            grid.point(i)
        )));
    }
    Ok(grid)
}

/// How position cells are tested against a strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellRule {
    /// A cell is inside the strip when its node is.
    #[default]
    Center,
    /// Cells are split at the strip edges and each piece is tested as a whole.
    Split,
}

/// A position cell `[lo, hi]` around `center` carrying `mass`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionCell {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub mass: f64,
}

impl PositionCell {
    fn inside(&self, a: f64, reach: f64, rule: CellRule) -> bool {
        match rule {
            CellRule::Center => self.center >= a && self.center <= reach,
            CellRule::Split => self.lo >= a && self.hi <= reach,
        }
    }

    fn below(&self, a: f64, rule: CellRule) -> bool {
        match rule {
            CellRule::Center => self.center < a,
            CellRule::Split => self.hi <= a,
        }
    }

    /// Fraction of the cell lying in `[a, reach]` under the given rule.
    fn coverage(&self, a: f64, reach: f64, rule: CellRule) -> f64 {
        match rule {
            CellRule::Center => f64::from(u8::from(self.inside(a, reach, rule))),
            CellRule::Split if self.hi > self.lo => {
                ((self.hi.min(reach) - self.lo.max(a)) / (self.hi - self.lo)).clamp(0.0, 1.0)
            }
            CellRule::Split => f64::from(u8::from(self.lo >= a && self.lo <= reach)),
        }
    }
}

/// Right end of the strip for momentum `p`, or `None` when `p ≥ 0`.
fn strip_reach(p: f64, a: f64, delta_t: f64, mass: f64) -> Option<f64> {
    (p < 0.0).then(|| a + p.abs() * delta_t / mass)
}

/// Position cells of the marginal pair under `rule`.
pub fn position_cells(
    marginals: &MarginalPair,
    a: f64,
    delta_t: f64,
    mass: f64,
    rule: CellRule,
) -> Vec<PositionCell> {
    let grid = &marginals.x_grid;
    let h = grid.spacing();
    let nodes: Vec<PositionCell> = marginals
        .x_density
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let c = grid.point(i);
            let (lo, hi) = ((c - 0.5 * h).max(grid.lo()), (c + 0.5 * h).min(grid.hi()));
            PositionCell { lo, hi, center: c, mass: d * node_weight(grid, i) }
        })
        .collect();
    match rule {
        CellRule::Center => nodes,
        CellRule::Split => {
            let mut cuts: Vec<f64> = std::iter::once(a)
                .chain(marginals.p_grid.points().into_iter().filter_map(|p| strip_reach(p, a, delta_t, mass)))
                .collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut pieces = Vec::with_capacity(nodes.len() + cuts.len());
            for cell in nodes {
                let mut lo = cell.lo;
                let first = cuts.partition_point(|&c| c <= cell.lo);
                for &cut in cuts[first..].iter().take_while(|&&c| c < cell.hi).chain(std::iter::once(&cell.hi)) {
                    pieces.push(PositionCell {
                        lo,
                        hi: cut,
                        center: 0.5 * (lo + cut),
                        mass: cell.mass * (cut - lo) / (cell.hi - cell.lo),
                    });
                    lo = cut;
                }
            }
            pieces
        }
    }
}

/// Trapezoid weight of node `i`.
fn node_weight(grid: &Grid1D, i: usize) -> f64 {
    let h = grid.spacing();
    if i == 0 || i + 1 == grid.len() {
        0.5 * h
    } else {
        h
    }
}

fn cell_masses(density: &[f64], grid: &Grid1D) -> Vec<f64> {
    density.iter().enumerate().map(|(i, d)| d * node_weight(grid, i)).collect()
}

/// For every momentum cell, the contiguous range of admissible position cells (possibly empty).
fn admissible_ranges(
    cells: &[PositionCell],
    p: &[f64],
    a: f64,
    delta_t: f64,
    mass: f64,
    rule: CellRule,
) -> Vec<std::ops::Range<usize>> {
    p.iter()
        .map(|&pj| match strip_reach(pj, a, delta_t, mass) {
            None => 0..0,
            Some(reach) => {
                let start = cells.partition_point(|c| match rule {
                    CellRule::Center => c.center < a,
                    CellRule::Split => c.lo < a,
                });
                let end = cells.partition_point(|c| match rule {
                    CellRule::Center => c.center <= reach,
                    CellRule::Split => c.hi <= reach,
                });
                start..end.max(start)
            }
        })
        .collect()
}

/// Minimum cut separating source from sink. Source arcs of `cut_x` cells and sink arcs of
/// `cut_p` cells are severed; every admissible pair has its position cell in `cut_x` or its
/// momentum cell in `cut_p`, so the cut capacity bounds every coupling's strip mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutCertificate {
    pub cut_x: Vec<usize>,
    pub cut_p: Vec<usize>,
    pub capacity: f64,
}

impl CutCertificate {
    /// Checks that the cut separates every admissible pair and returns its recomputed capacity.
    pub fn verify(&self, x_masses: &[f64], p_masses: &[f64], admissible: impl Fn(usize, usize) -> bool) -> Result<f64> {
        let mut in_x = vec![false; x_masses.len()];
        let mut in_p = vec![false; p_masses.len()];
        for &i in &self.cut_x {
            *in_x.get_mut(i).ok_or_else(|| Error::invalid("cut index out of range"))? = true;
        }
        for &j in &self.cut_p {
            *in_p.get_mut(j).ok_or_else(|| Error::invalid("cut index out of range"))? = true;
        }
        for i in 0..x_masses.len() {
            for j in 0..p_masses.len() {
                if admissible(i, j) && !in_x[i] && !in_p[j] {
                    return Err(Error::invalid(format!("admissible pair ({i}, {j}) crosses the cut")));
                }
            }
        }
        Ok(self.cut_x.iter().map(|&i| x_masses[i]).sum::<f64>() + self.cut_p.iter().map(|&j| p_masses[j]).sum::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingBound {
    /// Largest admissible mass over all couplings.
    pub max_strip_mass: f64,
    /// `P(x < a) + max_strip_mass`.
    pub bound_value: f64,
    pub certificate: CutCertificate,
}

/// Worst-case strip mass over all couplings of the given marginals, centre rule.
pub fn worst_case_bound(marginals: &MarginalPair, a: f64, delta_t: f64, mass: f64) -> Result<CouplingBound> {
    worst_case_bound_with(marginals, a, delta_t, mass, CellRule::Center)
}

/// Worst-case strip mass with an explicit cell rule. Certificate indices refer to
/// [`position_cells`] under the same rule and to the momentum grid nodes.
pub fn worst_case_bound_with(
    marginals: &MarginalPair,
    a: f64,
    delta_t: f64,
    mass: f64,
    rule: CellRule,
) -> Result<CouplingBound> {
    check_strip(a, delta_t, mass)?;
    let cells = position_cells(marginals, a, delta_t, mass, rule);
    solve_on_cells(&cells, &marginals.p_grid.points(), &marginals.p_masses(), a, delta_t, mass, rule)
}

/// Centre-rule bound for explicit cell coordinates and masses.
pub fn worst_case_bound_from_masses(
    x: &[f64],
    x_masses: &[f64],
    p: &[f64],
    p_masses: &[f64],
    a: f64,
    delta_t: f64,
    mass: f64,
) -> Result<CouplingBound> {
    if x.len() != x_masses.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: x_masses.len() });
    }
    check_strip(a, delta_t, mass)?;
    if x.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("cell coordinates must be strictly increasing"));
    }
    let cells: Vec<PositionCell> =
        x.iter().zip(x_masses).map(|(&c, &m)| PositionCell { lo: c, hi: c, center: c, mass: m }).collect();
    solve_on_cells(&cells, p, p_masses, a, delta_t, mass, CellRule::Center)
}

fn check_strip(a: f64, delta_t: f64, mass: f64) -> Result<()> {
    if !(delta_t.is_finite() && delta_t > 0.0) {
        return Err(Error::invalid(format!("delta_t must be positive, got {delta_t}")));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::invalid(format!("mass must be positive, got {mass}")));
    }
    if !a.is_finite() {
        return Err(Error::invalid("detection level must be finite"));
    }
    Ok(())
}

fn solve_on_cells(
    cells: &[PositionCell],
    p: &[f64],
    p_masses: &[f64],
    a: f64,
    delta_t: f64,
    mass: f64,
    rule: CellRule,
) -> Result<CouplingBound> {
    if p.len() != p_masses.len() {
        return Err(Error::LengthMismatch { expected: p.len(), got: p_masses.len() });
    }
    let x_masses: Vec<f64> = cells.iter().map(|c| c.mass).collect();
    if x_masses.iter().chain(p_masses).any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::invalid("cell masses must be finite and non-negative"));
    }
    if p.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("cell coordinates must be strictly increasing"));
    }
    let (sx, sp) = (x_masses.iter().sum::<f64>(), p_masses.iter().sum::<f64>());
    if (sx - sp).abs() > MASS_TOLERANCE {
        return Err(Error::InfeasibleMarginals(format!(
            "position mass {sx} and momentum mass {sp} differ by more than {MASS_TOLERANCE}"
        )));
    }

    let ranges = admissible_ranges(cells, p, a, delta_t, mass, rule);
    let (flow, cut_x, cut_p) = max_flow(&x_masses, p_masses, &ranges);
    let capacity =
        cut_x.iter().map(|&i| x_masses[i]).sum::<f64>() + cut_p.iter().map(|&j| p_masses[j]).sum::<f64>();
    let below: f64 = cells.iter().filter(|c| c.below(a, rule)).map(|c| c.mass).sum();
    Ok(CouplingBound {
        max_strip_mass: flow,
        bound_value: below + flow,
        certificate: CutCertificate { cut_x, cut_p, capacity },
    })
}

/// Whether position cell `cell` and momentum `p` form an admissible pair.
pub fn is_admissible(cell: &PositionCell, p: f64, a: f64, delta_t: f64, mass: f64, rule: CellRule) -> bool {
    strip_reach(p, a, delta_t, mass).is_some_and(|reach| cell.inside(a, reach, rule))
}

struct Arc {
    to: usize,
    residual: f64,
}

struct FlowNetwork {
    arcs: Vec<Arc>,
    adjacency: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        FlowNetwork { arcs: Vec::new(), adjacency: vec![Vec::new(); nodes] }
    }

    fn add(&mut self, from: usize, to: usize, capacity: f64) {
        self.adjacency[from].push(self.arcs.len());
        self.arcs.push(Arc { to, residual: capacity });
        self.adjacency[to].push(self.arcs.len());
        self.arcs.push(Arc { to: from, residual: 0.0 });
    }

    fn levels(&self, source: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.adjacency.len()];
        level[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adjacency[u] {
                let arc = &self.arcs[e];
                if arc.residual > 0.0 && level[arc.to] == usize::MAX {
                    level[arc.to] = level[u] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        level
    }

    fn augment(&mut self, u: usize, sink: usize, pushed: f64, level: &[usize], next: &mut [usize]) -> f64 {
        if u == sink {
            return pushed;
        }
        while next[u] < self.adjacency[u].len() {
            let e = self.adjacency[u][next[u]];
            let (to, residual) = (self.arcs[e].to, self.arcs[e].residual);
            if residual > 0.0 && level[to] == level[u] + 1 {
                let got = self.augment(to, sink, pushed.min(residual), level, next);
                if got > 0.0 {
                    // saturating arcs end at exactly zero, which guarantees termination
                    self.arcs[e].residual = if got == residual { 0.0 } else { residual - got };
                    self.arcs[e ^ 1].residual += got;
                    return got;
                }
            }
            next[u] += 1;
        }
        0.0
    }

    fn run(&mut self, source: usize, sink: usize) -> f64 {
        let mut total = 0.0;
        loop {
            let level = self.levels(source);
            if level[sink] == usize::MAX {
                return total;
            }
            let mut next = vec![0; self.adjacency.len()];
            loop {
                let got = self.augment(source, sink, f64::INFINITY, &level, &mut next);
                if got <= 0.0 {
                    break;
                }
                total += got;
            }
        }
    }
}

/// Dinic max-flow on source → x cells → p cells → sink. Returns the flow and the min cut.
fn max_flow(x_masses: &[f64], p_masses: &[f64], ranges: &[std::ops::Range<usize>]) -> (f64, Vec<usize>, Vec<usize>) {
    let (nx, np) = (x_masses.len(), p_masses.len());
    let source = nx + np;
    let sink = source + 1;
    let mut net = FlowNetwork::new(nx + np + 2);
    for (i, &m) in x_masses.iter().enumerate() {
        if m > 0.0 {
            net.add(source, i, m);
        }
    }
    for (j, &m) in p_masses.iter().enumerate() {
        if m > 0.0 && !ranges[j].is_empty() {
            net.add(nx + j, sink, m);
            for i in ranges[j].clone() {
                if x_masses[i] > 0.0 {
                    net.add(i, nx + j, f64::INFINITY);
                }
            }
        }
    }
    net.run(source, sink);
    // recompute the flow from the source arcs, which is exact up to summation order
    let flow: f64 = net.adjacency[source]
        .iter()
        .map(|&e| net.arcs[e ^ 1].residual)
        .sum();
    let reachable = net.levels(source);
    let cut_x = (0..nx).filter(|&i| reachable[i] == usize::MAX && x_masses[i] > 0.0).collect();
    let cut_p = (0..np).filter(|&j| reachable[nx + j] != usize::MAX).collect();
    (flow, cut_x, cut_p)
}

/// Outcome of comparing the joint density's own strip mass with the worst case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub strip_mass: f64,
    pub worst_case: CouplingBound,
    pub passed: bool,
}

/// The smoothed quantum density is one coupling of its marginals, so its strip mass must not
/// exceed the worst case. Centre rule.
pub fn coupling_consistency_check(
    jd: &JointDensity,
    marginals: &MarginalPair,
    a: f64,
    delta_t: f64,
    mass: f64,
) -> Result<ConsistencyReport> {
    coupling_consistency_check_with(jd, marginals, a, delta_t, mass, CellRule::Center)
}

pub fn coupling_consistency_check_with(
    jd: &JointDensity,
    marginals: &MarginalPair,
    a: f64,
    delta_t: f64,
    mass: f64,
    rule: CellRule,
) -> Result<ConsistencyReport> {
    if jd.grid.x != marginals.x_grid || jd.grid.p != marginals.p_grid {
        return Err(Error::MarginalMismatch("joint density and marginals use different grids".into()));
    }
    for (name, own, given) in [
        ("position", position_marginal(jd)?, &marginals.x_density),
        ("momentum", momentum_marginal(jd)?, &marginals.p_density),
    ] {
        let dev = own.iter().zip(given.iter()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        let scale = given.iter().cloned().fold(0.0, f64::max).max(1.0);
        if dev > MARGINAL_TOLERANCE * scale {
            return Err(Error::MarginalMismatch(format!(
                "{name} marginal of the joint density deviates by {dev} from the supplied one"
            )));
        }
    }
    let worst_case = worst_case_bound_with(marginals, a, delta_t, mass, rule)?;
    // the density's own coupling, on the unsplit node cells
    let nodes = position_cells(marginals, a, delta_t, mass, CellRule::Center);
    let mut strip_mass = 0.0;
    for (j, p) in jd.grid.p.points().into_iter().enumerate() {
        let Some(reach) = strip_reach(p, a, delta_t, mass) else { continue };
        let wp = node_weight(&jd.grid.p, j);
        for (i, cell) in nodes.iter().enumerate() {
            let frac = cell.coverage(a, reach, rule);
            if frac > 0.0 {
                strip_mass += jd.at(i, j) * node_weight(&jd.grid.x, i) * wp * frac;
            }
        }
    }
    Ok(ConsistencyReport {
        passed: strip_mass <= worst_case.max_strip_mass + 1e-6,
        strip_mass,
        worst_case,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn solve(xm: &[f64], pm: &[f64], admissible: &[(usize, usize)]) -> f64 {
        let ranges: Vec<_> = (0..pm.len())
            .map(|j| {
                let is: Vec<usize> = admissible.iter().filter(|(_, jj)| *jj == j).map(|(i, _)| *i).collect();
                match (is.iter().min(), is.iter().max()) {
                    (Some(&lo), Some(&hi)) => lo..hi + 1,
                    _ => 0..0,
                }
            })
            .collect();
        max_flow(xm, pm, &ranges).0
    }

    #[test]
    fn single_admissible_cell() {
        assert!((solve(&[0.5, 0.5], &[0.5, 0.5], &[(1, 1)]) - 0.5).abs() < 1e-15);
        assert!((solve(&[0.2, 0.8], &[0.7, 0.3], &[(0, 0)]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn everything_admissible_moves_all_mass() {
        let x = [0.0, 1.0, 2.0];
        let p = [-3.0, -2.0, -1.0];
        let b = worst_case_bound_from_masses(&x, &[0.2, 0.3, 0.5], &p, &[0.6, 0.1, 0.3], 0.0, 10.0, 1.0).unwrap();
        assert!((b.max_strip_mass - 1.0).abs() < 1e-12);
        assert!((b.bound_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn positive_momenta_carry_no_strip_mass() {
        let b = worst_case_bound_from_masses(&[0.0, 1.0], &[0.5, 0.5], &[1.0, 2.0], &[0.5, 0.5], 0.0, 1.0, 1.0)
            .unwrap();
        assert_eq!(b.max_strip_mass, 0.0);
        assert_eq!(b.certificate.capacity, 0.0);
    }

    #[test]
    fn mass_mismatch_rejected() {
        let err = worst_case_bound_from_masses(&[0.0, 1.0], &[0.5, 0.5], &[-1.0], &[0.9], 0.0, 1.0, 1.0);
        assert!(matches!(err, Err(Error::InfeasibleMarginals(_))));
        let g = Grid1D::new(-1.0, 1.0, 3).unwrap();
        assert!(matches!(
            MarginalPair::new(g, vec![0.0, 1.1, 0.0], g, vec![0.0, 1.0, 0.0]),
            Err(Error::InfeasibleMarginals(_))
        ));
        assert!(MarginalPair::new(g, vec![0.0, 1.0], g, vec![0.0, 1.0, 0.0]).is_err());
        assert!(MarginalPair::from_samples(&[0.0, 0.5, 2.0], vec![0.0; 3], &[0.0, 1.0], vec![0.0; 2]).is_err());
    }

    #[test]
    fn certificate_checks_separation() {
        let cert = CutCertificate { cut_x: vec![], cut_p: vec![], capacity: 0.0 };
        assert!(cert.verify(&[1.0], &[1.0], |_, _| true).is_err());
        let cert = CutCertificate { cut_x: vec![0], cut_p: vec![], capacity: 1.0 };
        assert_eq!(cert.verify(&[1.0], &[1.0], |_, _| true).unwrap(), 1.0);
    }

    #[test]
    fn split_cells_resolve_narrow_strips() {
        let g = Grid1D::new(-2.0, 2.0, 5).unwrap();
        let x_density = vec![0.0, 0.25, 0.5, 0.25, 0.0];
        let pg = Grid1D::new(-1.0, 1.0, 3).unwrap();
        let pair = MarginalPair::new(g, x_density, pg, vec![0.0, 1.0, 0.0]).unwrap();
        // strip [0.1, 0.3] lies inside the central cell [-0.5, 0.5], away from its node
        let centre = worst_case_bound_with(&pair, 0.1, 0.2, 1.0, CellRule::Center).unwrap();
        assert_eq!(centre.max_strip_mass, 0.0);
        let pair = MarginalPair::new(g, pair.x_density().to_vec(), Grid1D::new(-1.0, 1.0, 3).unwrap(), vec![2.0, 0.0, 0.0]).unwrap();
        let split = worst_case_bound_with(&pair, 0.1, 0.2, 1.0, CellRule::Split).unwrap();
        // uniform spreading puts a fifth of the central cell's mass 0.5 into the strip
        assert!((split.max_strip_mass - 0.1).abs() < 1e-12, "{}", split.max_strip_mass);
        let cells = position_cells(&pair, 0.1, 0.2, 1.0, CellRule::Split);
        assert!((cells.iter().map(|c| c.mass).sum::<f64>() - 1.0).abs() < 1e-12);
        let ps = pair.p_grid().points();
        let cap = split
            .certificate
            .verify(&cells.iter().map(|c| c.mass).collect::<Vec<_>>(), &pair.p_masses(), |i, j| {
                is_admissible(&cells[i], ps[j], 0.1, 0.2, 1.0, CellRule::Split)
            })
            .unwrap();
        assert!((cap - split.max_strip_mass).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn flow_equals_cut_and_respects_limits(
            xm in prop::collection::vec(0.0f64..1.0, 1..8),
            pm in prop::collection::vec(0.0f64..1.0, 1..8),
            a in -1.0f64..3.0,
            dt in 0.01f64..4.0,
        ) {
            let sx: f64 = xm.iter().sum();
            let sp: f64 = pm.iter().sum();
            prop_assume!(sx > 0.0 && sp > 0.0);
            let xm: Vec<f64> = xm.iter().map(|m| m / sx).collect();
            let pm: Vec<f64> = pm.iter().map(|m| m / sp).collect();
            let x: Vec<f64> = (0..xm.len()).map(|i| i as f64 * 0.5).collect();
            let p: Vec<f64> = (0..pm.len()).map(|j| -1.5 + j as f64 * 0.5).collect();
            let b = worst_case_bound_from_masses(&x, &xm, &p, &pm, a, dt, 1.0).unwrap();
            let cells: Vec<PositionCell> = x.iter().zip(&xm).map(|(&c, &m)| PositionCell { lo: c, hi: c, center: c, mass: m }).collect();
            let cap = b.certificate.verify(&xm, &pm, |i, j| is_admissible(&cells[i], p[j], a, dt, 1.0, CellRule::Center)).unwrap();
            prop_assert!((cap - b.max_strip_mass).abs() < 1e-12);
            let neg: f64 = p.iter().zip(&pm).filter(|(pj, _)| **pj < 0.0).map(|(_, m)| m).sum();
            prop_assert!(b.max_strip_mass <= neg + 1e-12);
            prop_assert!(b.bound_value <= 1.0 + 1e-9);
            let wider = worst_case_bound_from_masses(&x, &xm, &p, &pm, a, 2.0 * dt, 1.0).unwrap();
            prop_assert!(wider.max_strip_mass >= b.max_strip_mass - 1e-12);
        }
    }
}
