use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cfl_check, check_finite, y_sweep, HamiltonianTerms, PideDiagnostics, HamiltonianMode, ThetaGrid, ThetaKind};
use crate::error::{Error, Result};
use crate::grid::{lerp, quadratic_interp, time_grid, StateGrid1D};
use crate::model::{DemandCurve, HawkesLiquidity, RiskParams};

/// Largest grid accepted by the demonstration solver, in points `(y, lambda01, lambda10)`.
pub const GRID_CAP: [usize; 3] = [41, 21, 21];

/// Resolution of the demonstration solver, in intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoGrids {
    pub y_intervals: usize,
    pub lambda_intervals: [usize; 2],
    pub time_steps: usize,
    pub stored_slices: usize,
    /// Half-width of the inventory grid; defaults to 10 × the largest size.
    pub y_max: Option<f64>,
    /// Upper ends of the intensity grids; default `max(lambda0, lambda_inf) + 10 kappa m`.
    pub lambda_max: Option<[f64; 2]>,
    pub mode: HamiltonianMode,
}

impl Default for DemoGrids {
    fn default() -> Self {
        Self {
            y_intervals: 20,
            lambda_intervals: [10, 10],
            time_steps: 100,
            stored_slices: 4,
            y_max: None,
            lambda_max: None,
            mode: HamiltonianMode::Exact,
        }
    }
}

impl DemoGrids {
    /// Every dimension, time included, refined by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            y_intervals: self.y_intervals * factor,
            lambda_intervals: [self.lambda_intervals[0] * factor, self.lambda_intervals[1] * factor],
            time_steps: self.time_steps * factor,
            ..*self
        }
    }

    fn points(&self) -> [usize; 3] {
        [self.y_intervals + 1, self.lambda_intervals[0] + 1, self.lambda_intervals[1] + 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// Product of interval counts.
    pub cells: usize,
    pub steps: usize,
    pub wall_ms: f64,
    /// Bytes of one time level of the value function.
    pub bytes: usize,
}

fn check_cap(g: &DemoGrids) -> Result<()> {
    let p = g.points();
    if p.iter().zip(GRID_CAP).any(|(n, c)| *n > c) {
        let cells: usize = p.iter().product();
        return Err(Error::GridCap {
            requested: format!("{}x{}x{}", p[0], p[1], p[2]),
            cap: format!("{}x{}x{}", GRID_CAP[0], GRID_CAP[1], GRID_CAP[2]),
            projected_cells: cells,
            projected_bytes: cells * std::mem::size_of::<f64>(),
        });
    }
    Ok(())
}

/// Demonstration solver for `theta(t, y, lambda01, lambda10)` under GBM with
/// self-exciting liquidity: each executed trade on a side lifts that side's
/// intensity by `kappa m`, which then decays to `lambda_inf` at rate `kappa`.
///
/// ```text
/// 0 = theta_t + mu y (1 + theta_y) - gamma sigma^2 y^2 / 2 + sigma^2 y^2 / 2 theta_yy
///     - kappa (l01 - linf01) theta_l01 - kappa (l10 - linf10) theta_l10
///     + sum_z z m [l01 phi01 H01(p01) + l10 phi10 H10(p10)]
/// p01 = (theta(y, l01, l10) - theta(y - z, l01 + kappa m, l10)) / z
/// p10 = (theta(y, l01, l10) - theta(y + z, l01, l10 + kappa m)) / z
/// ```
///
/// The intensities multiply the fill probabilities directly (the curve's own
/// `lambda_height` is not used). Shifted intensities beyond the grid are
/// clamped to its upper end. The grid is capped at [`GRID_CAP`] points; larger
/// requests fail with [`Error::GridCap`] before anything is allocated.
pub fn solve_pide_hawkes_liquidity_demo(
    liquidity: &HawkesLiquidity,
    sigma: f64,
    mu: f64,
    risk: &RiskParams,
    curve: &DemandCurve,
    grids: &DemoGrids,
) -> Result<(ThetaGrid, CostReport)> {
    check_cap(grids)?;
    crate::riccati::check_horizon(risk.horizon, risk.gamma)?;
    let g = grids;
    if g.y_intervals < 4 || g.lambda_intervals.iter().any(|&n| n < 2) {
        return Err(Error::InvalidInput(
            "demo grid needs >= 4 y intervals and >= 2 per intensity axis".into(),
        ));
    }
    if g.time_steps == 0 || g.stored_slices == 0 || g.time_steps % g.stored_slices != 0 {
        return Err(Error::InvalidInput("stored_slices must divide time_steps".into()));
    }
    let ok = liquidity.kappa > 0.0
        && liquidity.m >= 0.0
        && liquidity.lambda_inf.iter().all(|l| *l >= 0.0)
        && liquidity.lambda0.iter().zip(&liquidity.lambda_inf).all(|(a, b)| a >= b);
    if !ok || !(sigma >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidInput("Hawkes-liquidity parameters out of range".into()));
    }
    let started = Instant::now();
    let p = g.points();
    let y_max = g.y_max.unwrap_or(10.0 * curve.grid.max_size());
    let y = StateGrid1D::new(-y_max, y_max, p[0])?;
    let jump = liquidity.kappa * liquidity.m;
    let mut lam = Vec::with_capacity(2);
    for s in 0..2 {
        let lo = liquidity.lambda_inf[s];
        let mut hi = g
            .lambda_max
            .map(|m| m[s])
            .unwrap_or(liquidity.lambda0[s].max(lo) + 10.0 * jump);
        if !(hi > lo) {
            hi = lo + lo.max(1.0);
        }
        if !(liquidity.lambda0[s] <= hi) {
            return Err(Error::OutsideGrid {
                what: format!("lambda0[{s}]"),
                value: liquidity.lambda0[s],
                lo,
                hi,
            });
        }
        lam.push(StateGrid1D::new(lo, hi, p[1 + s])?);
    }
    let (l01g, l10g) = (lam[0], lam[1]);
    let (ny, n1, n2) = (p[0], p[1], p[2]);
    let len = ny * n1 * n2;
    let ham = HamiltonianTerms::new(curve, g.mode, 0.0)?;
    let n = g.time_steps;
    let dt = risk.horizon / n as f64;
    let every = n / g.stored_slices;
    let hy = y.spacing();
    let ys = y.nodes();
    let c1: Vec<f64> = ys.iter().map(|v| mu * v).collect();
    let c2: Vec<f64> = ys.iter().map(|v| 0.5 * sigma * sigma * v * v).collect();
    // Shift stencils along each intensity axis.
    let stencil = |grid: &StateGrid1D| -> Vec<(usize, f64)> {
        (0..grid.n_points)
            .map(|j| {
                let l = grid.locate(grid.node(j) + jump);
                (l.index, l.weight)
            })
            .collect()
    };
    let (sh1, sh2) = (stencil(&l01g), stencil(&l10g));
    let line_of = |j1: usize, j2: usize| (j1 * n2 + j2) * ny;

    let mut theta = vec![0.0; len];
    let mut stored = vec![0.0; (g.stored_slices + 1) * len];
    let mut max_rate: f64 = 0.0;
    for step in 1..=n {
        let old = theta.clone();
        let rates: Vec<Result<f64>> = theta
            .par_chunks_mut(ny)
            .enumerate()
            .map(|(s, line)| {
                let (j1, j2) = (s / n2, s % n2);
                let src = &old[s * ny..(s + 1) * ny];
                let (k1, w1) = sh1[j1];
                let (k2, w2) = sh2[j2];
                let a01 = &old[line_of(k1, j2)..line_of(k1, j2) + ny];
                let b01 = &old[line_of(k1 + 1, j2)..line_of(k1 + 1, j2) + ny];
                let a10 = &old[line_of(j1, k2)..line_of(j1, k2) + ny];
                let b10 = &old[line_of(j1, k2 + 1)..line_of(j1, k2 + 1) + ny];
                let q = |v: &[f64], x: f64| quadratic_interp(y.lo, hy, v, x);
                let intens = [l01g.node(j1), l10g.node(j2)];
                let mut max_rate: f64 = 0.0;
                for i in 0..ny {
                    let yi = ys[i];
                    let (h, rate) = ham.node_rate(
                        intens,
                        src[i],
                        |z| lerp(q(a01, yi - z), q(b01, yi - z), w1),
                        |z| lerp(q(a10, yi + z), q(b10, yi + z), w2),
                    )?;
                    line[i] += dt * (mu * yi + h - 0.5 * risk.gamma * sigma * sigma * yi * yi);
                    max_rate = max_rate.max(rate);
                }
                y_sweep(&y, dt, &c1, &c2, line);
                Ok(max_rate)
            })
            .collect();
        for r in rates {
            let r = r?;
            cfl_check(dt, r, "explicit Hamiltonian terms of the Hawkes-liquidity PIDE")?;
            max_rate = max_rate.max(r);
        }
        // Implicit upwind decay along lambda01, then lambda10: lower-triangular.
        let h1 = l01g.spacing();
        for j1 in 1..n1 {
            let c = dt * liquidity.kappa * (l01g.node(j1) - l01g.lo) / h1;
            for j2 in 0..n2 {
                let (cur, prev) = (line_of(j1, j2), line_of(j1 - 1, j2));
                for i in 0..ny {
                    theta[cur + i] = (theta[cur + i] + c * theta[prev + i]) / (1.0 + c);
                }
            }
        }
        let h2 = l10g.spacing();
        for j1 in 0..n1 {
            for j2 in 1..n2 {
                let c = dt * liquidity.kappa * (l10g.node(j2) - l10g.lo) / h2;
                let (cur, prev) = (line_of(j1, j2), line_of(j1, j2 - 1));
                for i in 0..ny {
                    theta[cur + i] = (theta[cur + i] + c * theta[prev + i]) / (1.0 + c);
                }
            }
        }
        check_finite(&theta, step)?;
        if step % every == 0 {
            let s = g.stored_slices - step / every;
            stored[s * len..(s + 1) * len].copy_from_slice(&theta);
        }
    }
    let report = CostReport {
        cells: g.y_intervals * g.lambda_intervals[0] * g.lambda_intervals[1],
        steps: n,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        bytes: len * std::mem::size_of::<f64>(),
    };
    log::debug!("Hawkes-liquidity demo: {report:?}");
    let grid = ThetaGrid {
        kind: ThetaKind::HawkesLiquidity,
        times: time_grid(risk.horizon, g.stored_slices),
        y,
        aux: vec![l01g, l10g],
        values: stored,
        diagnostics: PideDiagnostics {
            time_steps: n,
            richardson: false,
            explicit_dt_limit: if max_rate > 0.0 { 1.0 / max_rate } else { f64::INFINITY },
        },
    };
    Ok((grid, report))
}

/// Runs the demonstration at `coarse` and at twice its resolution in every
/// dimension, returning both cost reports.
pub fn cost_scaling_demo(
    liquidity: &HawkesLiquidity,
    sigma: f64,
    mu: f64,
    risk: &RiskParams,
    curve: &DemandCurve,
    coarse: &DemoGrids,
) -> Result<[CostReport; 2]> {
    let fine = coarse.refined(2);
    check_cap(&fine)?;
    let (_, a) = solve_pide_hawkes_liquidity_demo(liquidity, sigma, mu, risk, curve, coarse)?;
    let (_, b) = solve_pide_hawkes_liquidity_demo(liquidity, sigma, mu, risk, curve, &fine)?;
    Ok([a, b])
}
