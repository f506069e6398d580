use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `n` nodes covering `[lo, hi]` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::invalid(format!("grid bounds must satisfy lo < hi, got [{lo}, {hi}]")));
        }
        if n < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 nodes, got {n}")));
        }
        Ok(Grid1D { lo, hi, n })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }
}

/// Rectangular phase-space grid; values are stored row-major with `x` as the slow index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub x: Grid1D,
    pub p: Grid1D,
}

impl PhaseSpaceGrid {
    pub fn new(x: Grid1D, p: Grid1D) -> Self {
        PhaseSpaceGrid { x, p }
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, ix: usize, ip: usize) -> usize {
        ix * self.p.len() + ip
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_endpoints() {
        let g = Grid1D::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn invalid_grids() {
        assert!(Grid1D::new(1.0, 1.0, 3).is_err());
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        assert!(Grid1D::new(0.0, f64::INFINITY, 3).is_err());
    }
}
