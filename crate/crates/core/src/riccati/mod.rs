//! Backward solvers for the coefficients `A`, `B` of the quadratic ansatz.
//!
//! All systems are integrated in time-to-maturity `tau = T - t` from the
//! zero terminal condition. `A` is solved first over the whole horizon, then
//! `B` with `A` as a known input; `B` never feeds back into `A`.
//!
//! The PDE systems use implicit Euler with the quadratic term `2 I2 A^2`
//! linearised as `2 I2 A_old A_new`, upwind advection, centred diffusion and
//! explicit nonlocal (jump-shift) terms. By default the result is
//! Richardson-extrapolated from runs with `n` and `2n` steps, which lifts the
//! time accuracy to second order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::StateGrid1D;
use crate::hamiltonian::{DemandMoments, MomentBasis, QuadraticCoeffs};
use crate::model::DemandCurve;
use crate::surface::SolverDiagnostics;

mod diffusive;
mod hawkes;
mod mmpp;
mod scalar;
mod zhawkes;

pub use diffusive::{
    default_nu_grid, default_sigma_grid, solve_heston_bates_ab, solve_stein_stein_ab,
};
pub use hawkes::{default_lambda_grid, solve_hawkes_price_ab};
pub use mmpp::solve_mmpp_ab;
pub use scalar::solve_constant_ab;
pub use zhawkes::{default_zhawkes_grids, solve_zhawkes_ab};

/// What to do when a nonlocal shift lands outside the state grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftPolicy {
    #[default]
    Clamp,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiccatiOptions {
    /// Output time steps over the horizon.
    pub time_steps: usize,
    /// Points per auxiliary-state axis when the grid is defaulted.
    pub state_points: usize,
    pub richardson: bool,
    pub shift_policy: ShiftPolicy,
    /// Point around which the Hamiltonians are expanded.
    pub expansion_point: f64,
    /// Skip the `B` solve (left at zero).
    pub skip_b: bool,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            time_steps: 400,
            state_points: 101,
            richardson: true,
            shift_policy: ShiftPolicy::Clamp,
            expansion_point: 0.0,
            skip_b: false,
        }
    }
}

impl RiccatiOptions {
    fn check(&self) -> Result<()> {
        if self.time_steps == 0 {
            return Err(Error::InvalidInput("time_steps must be >= 1".into()));
        }
        if self.state_points < 3 {
            return Err(Error::InvalidInput("state_points must be >= 3".into()));
        }
        if !self.expansion_point.is_finite() {
            return Err(Error::InvalidInput("expansion_point must be finite".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_horizon(horizon: f64, gamma: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidInput(format!("horizon must be > 0 (got {horizon})")));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be >= 0 (got {gamma})")));
    }
    Ok(())
}

/// Demand moments at the curve's own intensities, with a positivity check on `I2`.
pub(crate) fn moment_basis(curve: &DemandCurve, opts: &RiccatiOptions) -> Result<MomentBasis> {
    let coeffs = QuadraticCoeffs::new(curve, opts.expansion_point)?;
    Ok(MomentBasis::new(curve, &coeffs))
}

pub(crate) fn constant_moments(curve: &DemandCurve, opts: &RiccatiOptions) -> Result<DemandMoments> {
    let m = moment_basis(curve, opts)?.at(curve.side01.lambda_height, curve.side10.lambda_height);
    check_i2(m.i2)?;
    Ok(m)
}

pub(crate) fn check_i2(i2: f64) -> Result<()> {
    if !(i2.is_finite() && i2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "demand moment I2 must be > 0 (got {i2})"
        )));
    }
    Ok(())
}

/// Raw time-marching output, time-major with ascending `t`.
pub(crate) struct Marched {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub shift_clamps: u64,
    pub rows_checked: u64,
}

/// Runs `march` at `n` steps, and at `2n` when extrapolating, and combines.
pub(crate) fn with_richardson(
    n_states: usize,
    n: usize,
    opts: &RiccatiOptions,
    march: impl Fn(usize) -> Result<Marched>,
) -> Result<(Vec<f64>, Vec<f64>, SolverDiagnostics)> {
    let coarse = march(n)?;
    let mut diag = SolverDiagnostics {
        time_steps: n,
        richardson: opts.richardson,
        shift_clamps: coarse.shift_clamps,
        monotone_rows_checked: coarse.rows_checked,
        ..Default::default()
    };
    let (a, b) = if opts.richardson {
        let fine = march(2 * n)?;
        diag.monotone_rows_checked += fine.rows_checked;
        let mut a = coarse.a;
        let mut b = coarse.b;
        for j in 0..=n {
            for s in 0..n_states {
                let c = j * n_states + s;
                let f = 2 * j * n_states + s;
                diag.richardson_delta_a = diag.richardson_delta_a.max((fine.a[f] - a[c]).abs());
                diag.richardson_delta_b = diag.richardson_delta_b.max((fine.b[f] - b[c]).abs());
                a[c] = 2.0 * fine.a[f] - a[c];
                b[c] = 2.0 * fine.b[f] - b[c];
            }
        }
        (a, b)
    } else {
        (coarse.a, coarse.b)
    };
    if let Some(i) = a.iter().chain(&b).position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("A/B solve (entry {i})")));
    }
    diag.min_a = a.iter().copied().fold(f64::INFINITY, f64::min);
    diag.max_a = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((a, b, diag))
}

/// Linear interpolation stencil for a shifted evaluation point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    pub index: usize,
    pub weight: f64,
}

impl Stencil {
    pub fn eval(&self, v: &[f64]) -> f64 {
        crate::grid::lerp(v[self.index], v[self.index + 1], self.weight)
    }
}

/// Builds per-node stencils for `x -> x + shift`, applying the shift policy.
pub(crate) fn shift_stencils(
    grid: &StateGrid1D,
    shift: f64,
    policy: ShiftPolicy,
    what: &str,
) -> Result<(Vec<Stencil>, u64)> {
    let mut clamps = 0;
    let mut out = Vec::with_capacity(grid.n_points);
    for i in 0..grid.n_points {
        let x = grid.node(i) + shift;
        let loc = grid.locate(x);
        if loc.clamped {
            if policy == ShiftPolicy::Reject {
                return Err(Error::OutsideGrid {
                    what: what.into(),
                    value: x,
                    lo: grid.lo,
                    hi: grid.hi,
                });
            }
            clamps += 1;
        }
        out.push(Stencil {
            index: loc.index,
            weight: loc.weight,
        });
    }
    Ok((out, clamps))
}

/// Coefficients of one scalar unknown `u` on a 1-D grid:
/// `du/dtau = rate u + adv du/dx + diff d2u/dx2 + coupling * u(x + shift) + ...`.
pub(crate) struct LineOperator {
    pub grid: StateGrid1D,
    pub axis: &'static str,
    pub adv: Vec<f64>,
    pub diff: Vec<f64>,
    /// Nonlocal coefficient and the stencil of the shifted point, if any.
    pub nonlocal: Option<(Vec<f64>, Vec<Stencil>)>,
}

/// Tridiagonal rows for one implicit step, plus the explicitly treated
/// outflow-boundary advection.
pub(crate) struct Rows {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LineOperator {
    /// Spatial part of the implicit matrix (without `1/dt` and reaction).
    pub fn spatial_rows(&self) -> Rows {
        let n = self.grid.n_points;
        let h = self.grid.spacing();
        let mut r = Rows {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        };
        for i in 0..n {
            let a = self.adv[i];
            if i == 0 {
                // Inflow boundary: one-sided inward difference, implicit.
                if a > 0.0 {
                    r.diag[i] += a / h;
                    r.upper[i] -= a / h;
                }
            } else if i == n - 1 {
                if a < 0.0 {
                    r.diag[i] -= a / h;
                    r.lower[i] += a / h;
                }
            } else {
                let d = self.diff[i] / (h * h);
                r.diag[i] += 2.0 * d + a.abs() / h;
                r.lower[i] -= d + (-a).max(0.0) / h;
                r.upper[i] -= d + a.max(0.0) / h;
            }
        }
        r
    }

    /// Explicit contributions: outflow-boundary advection (the linear
    /// extrapolation closure) and the nonlocal term, from the old level.
    pub fn explicit(&self, old: &[f64], i: usize) -> f64 {
        let n = self.grid.n_points;
        let h = self.grid.spacing();
        let mut e = 0.0;
        if i == 0 && self.adv[0] < 0.0 {
            e += self.adv[0] * (old[1] - old[0]) / h;
        }
        if i == n - 1 && self.adv[i] > 0.0 {
            e += self.adv[i] * (old[i] - old[i - 1]) / h;
        }
        if let Some((coef, st)) = &self.nonlocal {
            e += coef[i] * st[i].eval(old);
        }
        e
    }
}

/// Verifies that the implicit matrix is an M-matrix row by row: positive
/// diagonal, nonpositive off-diagonals, strict diagonal dominance.
pub(crate) fn check_monotone(
    rows: &Rows,
    op: &LineOperator,
    t: f64,
    unknown: &str,
) -> Result<u64> {
    let n = rows.diag.len();
    for i in 0..n {
        let off = rows.lower[i].abs() + rows.upper[i].abs();
        if !(rows.diag[i] > off && rows.lower[i] <= 0.0 && rows.upper[i] <= 0.0) {
            return Err(Error::Monotonicity {
                cell: format!(
                    "{unknown} row {i} ({}={:.6e}, t={t:.6e})",
                    op.axis,
                    op.grid.node(i)
                ),
                detail: format!(
                    "diagonal {:.6e} vs off-diagonals ({:.6e}, {:.6e}); refine the time step",
                    rows.diag[i], rows.lower[i], rows.upper[i]
                ),
            });
        }
    }
    Ok(n as u64)
}

/// Marches a 1-D `A`/`B` pair.
///
/// `A`: `dA/dtau = -2 I2 A^2 + rate_a A + src_a + L_a[A]`;
/// `B`: `dB/dtau = rate_b B - 2 I2 A B + src_b + 2 A J1 + 2 A^2 J2 + L_b[B]`.
pub(crate) struct LineProblem {
    pub op_a: LineOperator,
    pub op_b: LineOperator,
    pub rate_a: Vec<f64>,
    pub src_a: Vec<f64>,
    pub rate_b: Vec<f64>,
    pub src_b: Vec<f64>,
    pub moments: DemandMoments,
    pub horizon: f64,
    pub skip_b: bool,
}

impl LineProblem {
    pub fn march(&self, n_steps: usize) -> Result<Marched> {
        let n = self.op_a.grid.n_points;
        let dt = self.horizon / n_steps as f64;
        let m = self.moments;
        let mut a = vec![0.0; (n_steps + 1) * n];
        let mut b = vec![0.0; (n_steps + 1) * n];
        let mut rows_checked = 0;
        let sa = self.op_a.spatial_rows();
        let sb = self.op_b.spatial_rows();
        let mut rhs = vec![0.0; n];
        let mut diag = vec![0.0; n];
        // tau index k lives at time index n_steps - k.
        for k in 1..=n_steps {
            let t = self.horizon - dt * k as f64;
            let (done, todo) = a.split_at_mut((n_steps - k + 1) * n);
            let old = &todo[..n];
            let new = &mut done[(n_steps - k) * n..];
            for i in 0..n {
                diag[i] = 1.0 / dt + sa.diag[i] + 2.0 * m.i2 * old[i] - self.rate_a[i];
                rhs[i] = old[i] / dt + self.src_a[i] + self.op_a.explicit(old, i);
            }
            let rows = Rows {
                lower: sa.lower.clone(),
                diag: diag.clone(),
                upper: sa.upper.clone(),
            };
            rows_checked += check_monotone(&rows, &self.op_a, t, "A")?;
            new.copy_from_slice(&rhs);
            crate::linalg::solve_tridiagonal(&rows.lower, &rows.diag, &rows.upper, new);
        }
        if !self.skip_b {
            for k in 1..=n_steps {
                let t = self.horizon - dt * k as f64;
                let an = &a[(n_steps - k) * n..(n_steps - k + 1) * n];
                let (done, todo) = b.split_at_mut((n_steps - k + 1) * n);
                let old = &todo[..n];
                let new = &mut done[(n_steps - k) * n..];
                for i in 0..n {
                    diag[i] = 1.0 / dt + sb.diag[i] + 2.0 * m.i2 * an[i] - self.rate_b[i];
                    rhs[i] = old[i] / dt
                        + self.src_b[i]
                        + 2.0 * an[i] * m.j1
                        + 2.0 * an[i] * an[i] * m.j2
                        + self.op_b.explicit(old, i);
                }
                let rows = Rows {
                    lower: sb.lower.clone(),
                    diag: diag.clone(),
                    upper: sb.upper.clone(),
                };
                rows_checked += check_monotone(&rows, &self.op_b, t, "B")?;
                new.copy_from_slice(&rhs);
                crate::linalg::solve_tridiagonal(&rows.lower, &rows.diag, &rows.upper, new);
            }
        }
        Ok(Marched {
            a,
            b,
            shift_clamps: 0,
            rows_checked,
        })
    }
}
