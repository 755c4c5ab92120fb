//! Finite-difference solvers for the value function `theta(t, y, state)`
//! itself, without the quadratic ansatz.
//!
//! Each time step is a first-order splitting: an explicit step for the
//! Hamiltonian, jump and cross-derivative terms, then implicit sweeps for the
//! `y`-differential operator and for each auxiliary-state operator.
//!
//! Values off the `y`-grid (shifted arguments `y ± z`, `y (1 + eta)` and the
//! ghost nodes of the implicit sweep) come from quadratic Lagrange
//! interpolation/extrapolation. Every operator therefore maps functions that
//! are quadratic in `y` to quadratic functions, which is what makes the
//! quadratic-Hamiltonian mode reproduce the `A`/`B` systems exactly in `y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{quadratic_interp, StateGrid1D};
use crate::hamiltonian::{self, Alpha, QuadraticCoeffs};
use crate::linalg::solve_tridiagonal;
use crate::model::{DemandCurve, Side};

mod hawkes_liquidity;
mod heston_bates;
mod mmpp;

pub use hawkes_liquidity::{
    cost_scaling_demo, solve_pide_hawkes_liquidity_demo, CostReport, DemoGrids, GRID_CAP,
};
pub use heston_bates::solve_pide_heston_bates;
pub use mmpp::solve_pide_mmpp;

/// How the Hamiltonian terms of the equation are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianMode {
    /// The exact logistic Hamiltonian.
    #[default]
    Exact,
    /// Its second-order Taylor polynomial (the equation behind the ansatz).
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PideOptions {
    pub mode: HamiltonianMode,
    pub time_steps: usize,
    /// Number of stored time intervals; must divide `time_steps`.
    pub stored_slices: usize,
    pub richardson: bool,
    pub y_points: usize,
    /// Half-width of the inventory grid; defaults to 10 × the largest size.
    pub y_max: Option<f64>,
    /// Points of the auxiliary-state grid when it is defaulted.
    pub aux_points: usize,
    pub expansion_point: f64,
}

impl Default for PideOptions {
    fn default() -> Self {
        Self {
            mode: HamiltonianMode::Exact,
            time_steps: 400,
            stored_slices: 10,
            richardson: true,
            y_points: 41,
            y_max: None,
            aux_points: 41,
            expansion_point: 0.0,
        }
    }
}

impl PideOptions {
    pub(crate) fn check(&self) -> Result<()> {
        if self.time_steps == 0 || self.stored_slices == 0 || self.time_steps % self.stored_slices != 0 {
            return Err(Error::InvalidInput(format!(
                "stored_slices ({}) must be >= 1 and divide time_steps ({})",
                self.stored_slices, self.time_steps
            )));
        }
        if self.y_points < 5 {
            return Err(Error::InvalidInput("y_points must be >= 5".into()));
        }
        if self.aux_points < 3 {
            return Err(Error::InvalidInput("aux_points must be >= 3".into()));
        }
        Ok(())
    }

    pub(crate) fn y_grid(&self, curve: &DemandCurve) -> Result<StateGrid1D> {
        let y_max = self.y_max.unwrap_or(10.0 * curve.grid.max_size());
        if !(y_max.is_finite() && y_max > 0.0) {
            return Err(Error::InvalidInput(format!("y_max must be > 0 (got {y_max})")));
        }
        StateGrid1D::new(-y_max, y_max, self.y_points)
    }
}

/// Kind of auxiliary state carried by a [`ThetaGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaKind {
    HestonBates,
    Mmpp,
    HawkesLiquidity,
}

impl ThetaKind {
    pub fn axis_names(self) -> &'static [&'static str] {
        match self {
            ThetaKind::HestonBates => &["nu"],
            ThetaKind::Mmpp => &["regime"],
            ThetaKind::HawkesLiquidity => &["lambda01", "lambda10"],
        }
    }
}

/// Value function on stored time slices × auxiliary grid × `y`-grid.
///
/// `values` is laid out `[time][aux state][y]` with `y` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    pub kind: ThetaKind,
    pub times: Vec<f64>,
    pub y: StateGrid1D,
    pub aux: Vec<StateGrid1D>,
    pub values: Vec<f64>,
    pub diagnostics: PideDiagnostics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PideDiagnostics {
    pub time_steps: usize,
    pub richardson: bool,
    /// Largest stable explicit step observed, `1 / max rate`.
    pub explicit_dt_limit: f64,
}

impl ThetaGrid {
    pub fn n_aux(&self) -> usize {
        self.aux.iter().map(|g| g.n_points).product()
    }

    /// The `y`-line at stored time `j` and flat auxiliary index `s`.
    pub fn line(&self, j: usize, s: usize) -> &[f64] {
        let ny = self.y.n_points;
        let off = (j * self.n_aux() + s) * ny;
        &self.values[off..off + ny]
    }

    /// Quadratic interpolation in `y` on a stored line; errors outside the grid.
    pub fn value_on_line(&self, j: usize, s: usize, y: f64) -> Result<f64> {
        if !self.y.contains(y) {
            return Err(Error::OutsideGrid {
                what: "y".into(),
                value: y,
                lo: self.y.lo,
                hi: self.y.hi,
            });
        }
        Ok(quadratic_interp(self.y.lo, self.y.spacing(), self.line(j, s), y))
    }

    /// The `y`-line at time `t` and auxiliary state `aux`, multilinear in time
    /// and in the auxiliary axes (regimes are looked up exactly). Outside the
    /// auxiliary grid the state is clamped, or rejected when `strict`; the flag
    /// reports a clamp.
    pub fn line_at(&self, t: f64, aux: &[f64], strict: bool) -> Result<(Vec<f64>, bool)> {
        if aux.len() != self.aux.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} auxiliary coordinates, got {}",
                self.aux.len(),
                aux.len()
            )));
        }
        let horizon = *self.times.last().unwrap_or(&0.0);
        if !t.is_finite() || t < -1e-12 || t > horizon * (1.0 + 1e-12) {
            return Err(Error::OutsideGrid {
                what: "t".into(),
                value: t,
                lo: 0.0,
                hi: horizon,
            });
        }
        let mut clamped = false;
        let mut corners: Vec<(usize, f64)> = vec![(0, 1.0)];
        for (k, (g, &x)) in self.aux.iter().zip(aux).enumerate() {
            let (i0, w) = if self.kind == ThetaKind::Mmpp {
                let r = x.round();
                if !(r >= 0.0 && (r as usize) < g.n_points) || (x - r).abs() > 1e-9 {
                    return Err(Error::OutsideGrid {
                        what: "regime".into(),
                        value: x,
                        lo: 0.0,
                        hi: (g.n_points - 1) as f64,
                    });
                }
                (r as usize, 0.0)
            } else {
                let loc = g.locate(x);
                if loc.clamped {
                    if strict {
                        return Err(Error::OutsideGrid {
                            what: self.kind.axis_names()[k].into(),
                            value: x,
                            lo: g.lo,
                            hi: g.hi,
                        });
                    }
                    clamped = true;
                }
                (loc.index, loc.weight)
            };
            let mut next = Vec::with_capacity(corners.len() * 2);
            for &(idx, wt) in &corners {
                next.push((idx * g.n_points + i0, wt * (1.0 - w)));
                if w > 0.0 {
                    next.push((idx * g.n_points + i0 + 1, wt * w));
                }
            }
            corners = next;
        }
        let (j, wt) = crate::grid::locate_time(&self.times, t);
        let mut out = vec![0.0; self.y.n_points];
        for (jj, tw) in [(j, 1.0 - wt), (j + 1, wt)] {
            if tw == 0.0 || jj >= self.times.len() {
                continue;
            }
            for &(s, w) in &corners {
                for (o, v) in out.iter_mut().zip(self.line(jj, s)) {
                    *o += tw * w * v;
                }
            }
        }
        Ok((out, clamped))
    }

    /// Fits `theta ~ -A y^2 - B y - C` by least squares over `|y| <= y_max / 2`.
    pub fn fit_quadratic(&self, j: usize, s: usize) -> (f64, f64, f64) {
        let line = self.line(j, s);
        let half = 0.5 * self.y.hi.max(-self.y.lo);
        let pts: Vec<(f64, f64)> = (0..self.y.n_points)
            .map(|i| (self.y.node(i), line[i]))
            .filter(|(y, _)| y.abs() <= half + 1e-12)
            .collect();
        let [c0, c1, c2] = least_squares_quadratic(&pts);
        (-c2, -c1, -c0)
    }

    /// CSV with columns `t,y,<aux names>,theta`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["t", "y"];
        header.extend_from_slice(self.kind.axis_names());
        header.push("theta");
        writeln!(w, "{}", header.join(","))?;
        let fmt = crate::surface::fmt_f64;
        for (j, &t) in self.times.iter().enumerate() {
            for s in 0..self.n_aux() {
                let mut aux = Vec::new();
                let mut rem = s;
                for g in self.aux.iter().rev() {
                    aux.push(rem % g.n_points);
                    rem /= g.n_points;
                }
                aux.reverse();
                let aux_txt: Vec<String> = aux
                    .iter()
                    .zip(&self.aux)
                    .map(|(&i, g)| {
                        if self.kind == ThetaKind::Mmpp {
                            i.to_string()
                        } else {
                            fmt(g.node(i))
                        }
                    })
                    .collect();
                for (i, v) in self.line(j, s).iter().enumerate() {
                    writeln!(w, "{},{},{},{}", fmt(t), fmt(self.y.node(i)), aux_txt.join(","), fmt(*v))?;
                }
            }
        }
        Ok(())
    }
}

/// Ordinary least squares for `c0 + c1 y + c2 y^2`.
pub fn least_squares_quadratic(pts: &[(f64, f64)]) -> [f64; 3] {
    let mut m = vec![vec![0.0; 4]; 3];
    for &(y, v) in pts {
        let basis = [1.0, y, y * y];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += basis[r] * basis[c];
            }
            m[r][3] += basis[r] * v;
        }
    }
    let x = crate::linalg::gauss_solve_augmented(&mut m).unwrap_or_else(|| vec![0.0; 3]);
    [x[0], x[1], x[2]]
}

/// Hamiltonian evaluation for both sides and every size.
pub(crate) struct HamiltonianTerms {
    mode: HamiltonianMode,
    sizes: Vec<f64>,
    /// `phi_k m_k` per side.
    mass: [Vec<f64>; 2],
    a: [Vec<f64>; 2],
    b: [Vec<f64>; 2],
    alpha: [Vec<Alpha>; 2],
}

impl HamiltonianTerms {
    pub fn new(curve: &DemandCurve, mode: HamiltonianMode, expansion_point: f64) -> Result<Self> {
        let coeffs = QuadraticCoeffs::new(curve, expansion_point)?;
        let per_side = |f: &dyn Fn(Side) -> Vec<f64>| [f(Side::ZeroOne), f(Side::OneZero)];
        Ok(Self {
            mode,
            sizes: curve.grid.sizes.clone(),
            mass: per_side(&|s| {
                curve
                    .side(s)
                    .phi
                    .iter()
                    .zip(&curve.grid.weights)
                    .map(|(p, m)| p * m)
                    .collect()
            }),
            a: per_side(&|s| curve.side(s).a.clone()),
            b: per_side(&|s| curve.side(s).b.clone()),
            alpha: [coeffs.side01, coeffs.side10],
        })
    }

    /// `(H(p), |H'(p)|)` for side `s`, size index `k`.
    pub fn eval(&self, s: usize, k: usize, p: f64) -> Result<(f64, f64)> {
        match self.mode {
            HamiltonianMode::Exact => {
                let v = hamiltonian::evaluate(self.a[s][k], self.b[s][k], p)?;
                Ok((v.h, v.dh.abs()))
            }
            HamiltonianMode::Quadratic => {
                let al = &self.alpha[s][k];
                Ok((al.eval(p), al.derivative(p).abs()))
            }
        }
    }

    /// Markup-revenue term `sum_k z lambda phi m H(p)` at one node, where
    /// `theta_01(z)` / `theta_10(z)` return theta after a trade of size `z`.
    /// Also returns the explicit rate `sum lambda phi m |H'|`.
    pub fn node_rate(
        &self,
        lambda: [f64; 2],
        theta: f64,
        theta_01: impl Fn(f64) -> f64,
        theta_10: impl Fn(f64) -> f64,
    ) -> Result<(f64, f64)> {
        let mut total = 0.0;
        let mut rate = 0.0;
        for (k, &z) in self.sizes.iter().enumerate() {
            let p01 = (theta - theta_01(z)) / z;
            let p10 = (theta - theta_10(z)) / z;
            for (s, p) in [(0, p01), (1, p10)] {
                let w = lambda[s] * self.mass[s][k];
                if w == 0.0 {
                    continue;
                }
                let (h, dh) = self.eval(s, k, p)?;
                total += z * w * h;
                rate += w * dh;
            }
        }
        Ok((total, rate))
    }
}

/// Implicit `y`-sweep `(I - dt L) u = rhs` for
/// `L u = c1(y) u_y + c2(y) u_yy` (central differences), with ghost nodes
/// from quadratic extrapolation at both ends. Overwrites `line`.
pub(crate) fn y_sweep(grid: &StateGrid1D, dt: f64, c1: &[f64], c2: &[f64], line: &mut [f64]) {
    let n = grid.n_points;
    let h = grid.spacing();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let d = c2[i] / (h * h);
        let a = c1[i] / (2.0 * h);
        lower[i] = -dt * (d - a);
        diag[i] = 1.0 + 2.0 * dt * d;
        upper[i] = -dt * (d + a);
    }
    // Bottom: ghost u_{-1} = 3u_0 - 3u_1 + u_2.
    let g = lower[0];
    diag[0] += 3.0 * g;
    upper[0] -= 3.0 * g;
    if g != 0.0 {
        // Remove the u_2 entry with row 1.
        let f = g / upper[1];
        diag[0] -= f * lower[1];
        upper[0] -= f * diag[1];
        line[0] -= f * line[1];
    }
    // Top: ghost u_n = 3u_{n-1} - 3u_{n-2} + u_{n-3}.
    let g = upper[n - 1];
    diag[n - 1] += 3.0 * g;
    lower[n - 1] -= 3.0 * g;
    if g != 0.0 {
        let f = g / lower[n - 2];
        diag[n - 1] -= f * upper[n - 2];
        lower[n - 1] -= f * diag[n - 2];
        line[n - 1] -= f * line[n - 2];
    }
    solve_tridiagonal(&lower, &diag, &upper, line);
}

/// `d/dy` at node `i`, second order and exact for quadratics (one-sided at the ends).
pub(crate) fn y_derivative(line: &[f64], i: usize, h: f64) -> f64 {
    let n = line.len();
    if i == 0 {
        (-3.0 * line[0] + 4.0 * line[1] - line[2]) / (2.0 * h)
    } else if i == n - 1 {
        (3.0 * line[n - 1] - 4.0 * line[n - 2] + line[n - 3]) / (2.0 * h)
    } else {
        (line[i + 1] - line[i - 1]) / (2.0 * h)
    }
}

pub(crate) fn cfl_check(dt: f64, max_rate: f64, what: &str) -> Result<()> {
    if dt * max_rate > 1.0 {
        return Err(Error::Cfl {
            dt,
            required: 1.0 / max_rate,
            detail: what.into(),
        });
    }
    Ok(())
}

pub(crate) fn check_finite(values: &[f64], step: usize) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("PIDE step {step} (entry {i})")));
    }
    Ok(())
}

/// Combines stored slices of runs with `n` and `2n` steps.
pub(crate) fn richardson_combine(coarse: &mut [f64], fine: &[f64]) {
    for (c, f) in coarse.iter_mut().zip(fine) {
        *c = 2.0 * f - *c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn y_sweep_preserves_quadratics_under_pure_diffusion_and_drift() {
        // For u = y^2: L u = c1 * 2y + c2 * 2 with c1 = mu y, c2 = v y^2 / 2,
        // i.e. (2 mu + v) y^2. Then (I - dt L) u' = u has u' = u / (1 - dt(2mu+v)).
        let g = StateGrid1D::new(-5.0, 5.0, 21).unwrap();
        let (mu, v, dt) = (0.1, 0.3, 0.05);
        let ys = g.nodes();
        let c1: Vec<f64> = ys.iter().map(|y| mu * y).collect();
        let c2: Vec<f64> = ys.iter().map(|y| 0.5 * v * y * y).collect();
        let mut line: Vec<f64> = ys.iter().map(|y| y * y).collect();
        y_sweep(&g, dt, &c1, &c2, &mut line);
        let f = 1.0 / (1.0 - dt * (2.0 * mu + v));
        for (y, u) in ys.iter().zip(&line) {
            assert!((u - f * y * y).abs() < 1e-10, "y={y}");
        }
    }

    #[test]
    fn y_sweep_keeps_constants() {
        let g = StateGrid1D::new(-2.0, 2.0, 9).unwrap();
        let ys = g.nodes();
        let c1: Vec<f64> = ys.iter().map(|y| -0.3 * y).collect();
        let c2: Vec<f64> = ys.iter().map(|y| 0.02 * y * y).collect();
        let mut line = vec![1.5; 9];
        y_sweep(&g, 0.1, &c1, &c2, &mut line);
        assert!(line.iter().all(|u| (u - 1.5).abs() < 1e-13));
    }

    #[test]
    fn least_squares_recovers_exact_quadratic() {
        let pts: Vec<(f64, f64)> = (-5..=5)
            .map(|i| {
                let y = i as f64 * 0.5;
                (y, 1.0 - 2.0 * y + 0.25 * y * y)
            })
            .collect();
        let c = least_squares_quadratic(&pts);
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-12 && (c[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn one_sided_derivative_is_exact_on_quadratics() {
        let line: Vec<f64> = (0..6).map(|i| (i as f64).powi(2)).collect();
        assert!((y_derivative(&line, 0, 1.0) - 0.0).abs() < 1e-14);
        assert!((y_derivative(&line, 5, 1.0) - 10.0).abs() < 1e-14);
        assert!((y_derivative(&line, 2, 1.0) - 4.0).abs() < 1e-14);
    }
}
