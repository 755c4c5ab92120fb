//! Uniform grids and interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid over one auxiliary state variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateGrid1D {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

/// Position of a point relative to a grid: `x = (1 - w) * node[i] + w * node[i + 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub index: usize,
    pub weight: f64,
    pub clamped: bool,
}

impl StateGrid1D {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        let g = Self { lo, hi, n_points };
        g.check()?;
        Ok(g)
    }

    /// Grid with `anchor` lying exactly on a node, spacing chosen so that the
    /// upper end is at least `hi`.
    pub fn anchored(lo: f64, hi: f64, n_points: usize, anchor: f64) -> Result<Self> {
        let raw = Self::new(lo, hi, n_points)?;
        if !(anchor > lo && anchor < hi) {
            return Ok(raw);
        }
        let j = ((anchor - lo) / raw.spacing()).floor().max(1.0);
        let h = (anchor - lo) / j;
        Self::new(lo, lo + h * (n_points - 1) as f64, n_points)
    }

    fn check(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidInput(format!(
                "grid bounds must be finite with lo < hi (got [{}, {}])",
                self.lo, self.hi
            )));
        }
        if self.n_points < 3 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 3 points (got {})",
                self.n_points
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n_points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.hi
        } else {
            self.lo + self.spacing() * i as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.node(i)).collect()
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.lo) / self.spacing()).round();
        i.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Locates `x`, clamping to the end nodes when outside.
    pub fn locate(&self, x: f64) -> Location {
        let n = self.n_points;
        if x <= self.lo {
            return Location {
                index: 0,
                weight: 0.0,
                clamped: x < self.lo,
            };
        }
        if x >= self.hi {
            return Location {
                index: n - 2,
                weight: 1.0,
                clamped: x > self.hi,
            };
        }
        let s = (x - self.lo) / self.spacing();
        let i = (s.floor() as usize).min(n - 2);
        Location {
            index: i,
            weight: (s - i as f64).clamp(0.0, 1.0),
            clamped: false,
        }
    }

    /// Linear interpolation of nodal `values`, clamped at the ends.
    pub fn interp(&self, values: &[f64], x: f64) -> f64 {
        let l = self.locate(x);
        lerp(values[l.index], values[l.index + 1], l.weight)
    }
}

pub fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else if w == 1.0 {
        b
    } else {
        a + w * (b - a)
    }
}

/// Uniform time grid `0 = t_0 < ... < t_n = horizon`.
pub fn time_grid(horizon: f64, n_steps: usize) -> Vec<f64> {
    let dt = horizon / n_steps as f64;
    (0..=n_steps)
        .map(|j| if j == n_steps { horizon } else { dt * j as f64 })
        .collect()
}

/// Locates `t` on a uniform time grid, clamping to `[t_0, t_n]`.
pub fn locate_time(times: &[f64], t: f64) -> (usize, f64) {
    let n = times.len() - 1;
    let horizon = times[n];
    if n == 0 || t <= times[0] {
        return (0, 0.0);
    }
    if t >= horizon {
        return (n - 1, 1.0);
    }
    let s = t / horizon * n as f64;
    let i = (s.floor() as usize).min(n - 1);
    (i, (s - i as f64).clamp(0.0, 1.0))
}

/// Quadratic Lagrange interpolation on a uniform grid using the three nodes
/// nearest to `x`; extrapolates quadratically outside the grid. Exact for
/// quadratic data.
pub fn quadratic_interp(lo: f64, h: f64, values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let s = (x - lo) / h;
    let c = (s.round() as isize).clamp(1, n as isize - 2) as usize;
    let u = s - c as f64;
    let (f0, f1, f2) = (values[c - 1], values[c], values[c + 1]);
    f1 + 0.5 * u * (f2 - f0) + 0.5 * u * u * (f2 - 2.0 * f1 + f0)
}

/// Pairwise (cascade) summation; the result is independent of thread count
/// when the input order is fixed.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}
