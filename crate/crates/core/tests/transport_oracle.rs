mod common;

use backflow_core::backflow::strip_mass;
use backflow_core::corenum::{Grid1D, PhaseSpaceGrid};
use backflow_core::phasespace::{default_grid, joint_density, JointDensity};
use backflow_core::transport::*;
use common::*;
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    x: Vec<f64>,
    xm: Vec<f64>,
    p: Vec<f64>,
    pm: Vec<f64>,
    a: f64,
    dt: f64,
}

impl Instance {
    fn admissible(&self, i: usize, j: usize) -> bool {
        self.p[j] < 0.0 && self.x[i] >= self.a && self.x[i] <= self.a + self.p[j].abs() * self.dt
    }
}

fn sorted(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn masses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.iter().map(|m| m / s).collect()
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Instance {
        x: sorted(&mut rng, 6, -1.0, 3.0),
        xm: masses(&mut rng, 6),
        p: sorted(&mut rng, 6, -2.0, 1.0),
        pm: masses(&mut rng, 6),
        a: rng.gen_range(-0.5..1.0),
        dt: rng.gen_range(0.2..2.0),
    }
}

/// Maximises the admissible mass over the transportation polytope with a general LP solver.
fn lp_oracle(inst: &Instance) -> f64 {
    let (nx, np) = (inst.x.len(), inst.p.len());
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<Vec<_>> = (0..nx)
        .map(|i| {
            (0..np)
                .map(|j| lp.add_var(if inst.admissible(i, j) { 1.0 } else { 0.0 }, (0.0, f64::INFINITY)))
                .collect()
        })
        .collect();
    for i in 0..nx {
        let row: Vec<_> = (0..np).map(|j| (vars[i][j], 1.0)).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, inst.xm[i]);
    }
    for j in 0..np {
        let col: Vec<_> = (0..nx).map(|i| (vars[i][j], 1.0)).collect();
        lp.add_constraint(col.as_slice(), ComparisonOp::Eq, inst.pm[j]);
    }
    lp.solve().unwrap().objective()
}

/// Min over subsets S of position cells of mass(outside S) + mass(momentum cells reachable from S).
fn subset_oracle(inst: &Instance) -> f64 {
    let (nx, np) = (inst.x.len(), inst.p.len());
    (0u32..1 << nx)
        .map(|set| {
            let outside: f64 = (0..nx).filter(|i| set & (1 << i) == 0).map(|i| inst.xm[i]).sum();
            let reached: f64 = (0..np)
                .filter(|&j| (0..nx).any(|i| set & (1 << i) != 0 && inst.admissible(i, j)))
                .map(|j| inst.pm[j])
                .sum();
            outside + reached
        })
        .fold(f64::INFINITY, f64::min)
}

fn solve(inst: &Instance) -> CouplingBound {
    worst_case_bound_from_masses(&inst.x, &inst.xm, &inst.p, &inst.pm, inst.a, inst.dt, 1.0).unwrap()
}

#[test]
fn max_flow_matches_lp_and_subset_oracles() {
    for seed in 0..10 {
        let inst = instance(seed);
        let b = solve(&inst);
        let lp = lp_oracle(&inst);
        let sub = subset_oracle(&inst);
        assert!((b.max_strip_mass - lp).abs() < 1e-9, "seed {seed}: {} vs LP {lp}", b.max_strip_mass);
        assert!((b.max_strip_mass - sub).abs() < 1e-9, "seed {seed}: {} vs subsets {sub}", b.max_strip_mass);
        let cap = b.certificate.verify(&inst.xm, &inst.pm, |i, j| inst.admissible(i, j)).unwrap();
        assert!((cap - b.max_strip_mass).abs() < 1e-9);
        assert!((b.certificate.capacity - cap).abs() < 1e-12);
    }
}

/// Sinkhorn-style iterative proportional fitting of a positive matrix to the two marginals.
fn fitted_coupling(rng: &mut ChaCha8Rng, xm: &[f64], pm: &[f64]) -> Vec<Vec<f64>> {
    let mut f: Vec<Vec<f64>> = xm.iter().map(|_| pm.iter().map(|_| rng.gen_range(1e-3..1.0f64).powi(3)).collect()).collect();
    for _ in 0..2000 {
        for (row, target) in f.iter_mut().zip(xm) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v *= target / s);
        }
        for (j, target) in pm.iter().enumerate() {
            let s: f64 = f.iter().map(|r| r[j]).sum();
            f.iter_mut().for_each(|r| r[j] *= target / s);
        }
    }
    f
}

#[test]
fn worst_case_dominates_random_couplings() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 0..100 {
        let inst = instance(1000 + k);
        let b = solve(&inst);
        let f = fitted_coupling(&mut rng, &inst.xm, &inst.pm);
        for (i, row) in f.iter().enumerate() {
            assert!((row.iter().sum::<f64>() - inst.xm[i]).abs() < 1e-9);
        }
        let strip: f64 = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).filter(|&(i, j)| inst.admissible(i, j)).map(|(i, j)| f[i][j]).sum();
        assert!(strip <= b.max_strip_mass + 1e-9, "coupling {k}: {strip} > {}", b.max_strip_mass);
    }
}

fn normal_pair(cells: usize) -> MarginalPair {
    let density = |z: f64, mean: f64| (-0.5 * (z - mean).powi(2)).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let xg = Grid1D::new(-8.0, 8.0, cells).unwrap();
    let pg = Grid1D::new(-8.5, 7.5, cells).unwrap();
    MarginalPair::new(
        xg,
        xg.points().iter().map(|x| density(*x, 0.0)).collect(),
        pg,
        pg.points().iter().map(|p| density(*p, -0.5)).collect(),
    )
    .unwrap()
}

#[test]
fn refinement_changes_bound_little() {
    let coarse = worst_case_bound(&normal_pair(256), 0.0, 1.0, 1.0).unwrap();
    let fine = worst_case_bound(&normal_pair(512), 0.0, 1.0, 1.0).unwrap();
    assert!(coarse.max_strip_mass > 0.1);
    assert!((fine.max_strip_mass / coarse.max_strip_mass - 1.0).abs() <= 0.02);
}

#[test]
fn bound_is_monotone_in_horizon() {
    let pair = normal_pair(128);
    let mut last = 0.0;
    for dt in [0.1, 0.3, 1.0, 3.0] {
        let b = worst_case_bound(&pair, 0.2, dt, 1.0).unwrap();
        assert!(b.max_strip_mass >= last);
        assert!(b.bound_value <= 1.0 + 1e-9);
        last = b.max_strip_mass;
    }
}

#[test]
fn product_coupling_is_dominated() {
    let pair = normal_pair(128);
    let xm = pair.x_masses();
    let pm = pair.p_masses();
    let xs = pair.x_grid().points();
    let ps = pair.p_grid().points();
    let (a, dt) = (0.3, 1.5);
    let mut product = 0.0;
    for (i, x) in xs.iter().enumerate() {
        for (j, p) in ps.iter().enumerate() {
            if *p < 0.0 && *x >= a && *x <= a + p.abs() * dt {
                product += xm[i] * pm[j];
            }
        }
    }
    let b = worst_case_bound(&pair, a, dt, 1.0).unwrap();
    assert!(product <= b.max_strip_mass + 1e-12);
}

#[test]
fn quantum_density_is_dominated_in_gravity_example() {
    let s = gravity_state();
    let prec = precision(0.1);
    let t = 25.0;
    let jd = joint_density(&s, &prec, &default_grid(&s, &prec, t).unwrap(), t).unwrap();
    let pair = MarginalPair::from_joint(&jd).unwrap();
    let centre = coupling_consistency_check(&jd, &pair, 0.0, 1.0, s.mass()).unwrap();
    assert!(centre.passed, "{} > {}", centre.strip_mass, centre.worst_case.max_strip_mass);
    // the strip is narrower than one position cell, so only split cells resolve it
    let split = coupling_consistency_check_with(&jd, &pair, 0.0, 1.0, s.mass(), CellRule::Split).unwrap();
    assert!(split.passed, "{} > {}", split.strip_mass, split.worst_case.max_strip_mass);
    let interpolated = strip_mass(&jd, 0.0, 1.0, s.mass()).unwrap();
    assert!((split.strip_mass - interpolated).abs() < 0.05 * interpolated, "{} vs {interpolated}", split.strip_mass);
    assert!(interpolated <= split.worst_case.max_strip_mass + 1e-6);
    assert!(split.worst_case.max_strip_mass > 100.0 * centre.worst_case.max_strip_mass);
}

#[test]
fn inflated_density_is_rejected() {
    let s = gravity_state();
    let prec = precision(0.1);
    let grid = default_grid(&s, &prec, 25.0).unwrap();
    let jd = joint_density(&s, &prec, &grid, 25.0).unwrap();
    let pair = MarginalPair::from_joint(&jd).unwrap();
    let inflated = JointDensity { values: jd.values.iter().map(|v| v * 1.1).collect(), ..jd.clone() };
    assert!(matches!(
        coupling_consistency_check(&inflated, &pair, 0.0, 1.0, 1.0),
        Err(backflow_core::Error::MarginalMismatch(_))
    ));
    let other = JointDensity { grid: PhaseSpaceGrid::new(Grid1D::new(-1.0, 1.0, 512).unwrap(), grid.p), ..jd };
    assert!(coupling_consistency_check(&other, &pair, 0.0, 1.0, 1.0).is_err());
}

#[test]
fn sampled_marginals_round_trip() {
    let pair = normal_pair(64);
    let again = MarginalPair::from_samples(
        &pair.x_grid().points(),
        pair.x_density().to_vec(),
        &pair.p_grid().points(),
        pair.p_density().to_vec(),
    )
    .unwrap();
    assert_eq!(worst_case_bound(&pair, 0.0, 1.0, 1.0).unwrap(), worst_case_bound(&again, 0.0, 1.0, 1.0).unwrap());
}
