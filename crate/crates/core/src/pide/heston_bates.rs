use rayon::prelude::*;

use super::{
    cfl_check, check_finite, richardson_combine, y_derivative, y_sweep, HamiltonianTerms,
    PideDiagnostics, PideOptions, ThetaGrid, ThetaKind,
};
use crate::error::{Error, Result};
use crate::grid::{quadratic_interp, time_grid, StateGrid1D};
use crate::linalg::solve_tridiagonal;
use crate::model::{DemandCurve, HestonBates, RiskParams};
use crate::riccati::{default_nu_grid, LineOperator};

struct Problem<'a> {
    model: &'a HestonBates,
    gamma: f64,
    horizon: f64,
    ham: HamiltonianTerms,
    lambda: [f64; 2],
    y: StateGrid1D,
    nu: StateGrid1D,
    nu_op: LineOperator,
}

impl Problem<'_> {
    /// Explicit part of `d theta / d tau` on every node; returns the largest
    /// explicit rate seen.
    fn explicit(&self, theta: &[f64], out: &mut [f64]) -> Result<f64> {
        let ny = self.y.n_points;
        let nn = self.nu.n_points;
        let hy = self.y.spacing();
        let hn = self.nu.spacing();
        let m = self.model;
        let jump_var = m.jump_rate * m.jumps.moments().eta_bar_sq;
        let rates: Vec<Result<f64>> = out
            .par_chunks_mut(ny)
            .enumerate()
            .map(|(j, out_line)| {
                let nu = self.nu.node(j);
                let line = &theta[j * ny..(j + 1) * ny];
                let at = |x: f64| quadratic_interp(self.y.lo, hy, line, x);
                // Neighbour lines for the cross derivative (one-sided at the ends).
                let (jl, jh) = (j.saturating_sub(1), (j + 1).min(nn - 1));
                let dnu = (jh - jl) as f64 * hn;
                let lo_line = &theta[jl * ny..(jl + 1) * ny];
                let hi_line = &theta[jh * ny..(jh + 1) * ny];
                let cross = m.rho * nu * m.xi;
                let mut max_rate: f64 = 0.0;
                for i in 0..ny {
                    let y = self.y.node(i);
                    let th = line[i];
                    let (h, mut rate) = self.ham.node_rate(self.lambda, th, |z| at(y - z), |z| at(y + z))?;
                    let mut v = m.mu * y + h - 0.5 * self.gamma * (nu + jump_var) * y * y;
                    if m.jump_rate > 0.0 {
                        let mut jump = 0.0;
                        for (eta, p) in m.jumps.supports.iter().zip(&m.jumps.probs) {
                            jump += p * (at(y * (1.0 + eta)) - th);
                        }
                        v += m.jump_rate * jump;
                        rate += 2.0 * m.jump_rate;
                    }
                    if cross != 0.0 {
                        let d = (y_derivative(hi_line, i, hy) - y_derivative(lo_line, i, hy)) / dnu;
                        v += cross * y * d;
                        rate += (cross * y).abs() / (hy * dnu);
                    }
                    out_line[i] = v;
                    max_rate = max_rate.max(rate);
                }
                Ok(max_rate)
            })
            .collect();
        let mut max_rate: f64 = 0.0;
        for r in rates {
            max_rate = max_rate.max(r?);
        }
        Ok(max_rate)
    }

    /// Marches `n` steps; returns `[slice][nu][y]` in ascending `t` and the
    /// largest explicit rate.
    fn march(&self, n: usize, slices: usize) -> Result<(Vec<f64>, f64)> {
        let ny = self.y.n_points;
        let nn = self.nu.n_points;
        let len = ny * nn;
        let dt = self.horizon / n as f64;
        let every = n / slices;
        let mut theta = vec![0.0; len];
        let mut rhs = vec![0.0; len];
        let mut stored = vec![0.0; (slices + 1) * len];
        let ys = self.y.nodes();
        let c1: Vec<f64> = ys.iter().map(|y| self.model.mu * y).collect();
        let rows = self.nu_op.spatial_rows();
        let lower: Vec<f64> = rows.lower.iter().map(|x| dt * x).collect();
        let upper: Vec<f64> = rows.upper.iter().map(|x| dt * x).collect();
        let diag: Vec<f64> = rows.diag.iter().map(|x| 1.0 + dt * x).collect();
        let mut max_rate: f64 = 0.0;
        for k in 1..=n {
            let rate = self.explicit(&theta, &mut rhs)?;
            max_rate = max_rate.max(rate);
            cfl_check(dt, rate, "explicit Hamiltonian/jump/cross terms of the Heston-Bates PIDE")?;
            for (t, r) in theta.iter_mut().zip(&rhs) {
                *t += dt * r;
            }
            theta.par_chunks_mut(ny).enumerate().for_each(|(j, line)| {
                let nu = self.nu.node(j);
                let c2: Vec<f64> = ys.iter().map(|y| 0.5 * nu * y * y).collect();
                y_sweep(&self.y, dt, &c1, &c2, line);
            });
            let mut col = vec![0.0; nn];
            let mut src = vec![0.0; nn];
            for i in 0..ny {
                for j in 0..nn {
                    src[j] = theta[j * ny + i];
                }
                for j in 0..nn {
                    col[j] = src[j] + dt * self.nu_op.explicit(&src, j);
                }
                solve_tridiagonal(&lower, &diag, &upper, &mut col);
                for j in 0..nn {
                    theta[j * ny + i] = col[j];
                }
            }
            check_finite(&theta, k)?;
            if k % every == 0 {
                let s = slices - k / every;
                stored[s * len..(s + 1) * len].copy_from_slice(&theta);
            }
        }
        Ok((stored, max_rate))
    }
}

/// Solves for `theta(t, y, nu)` under Heston dynamics with compound-Poisson
/// price jumps:
///
/// ```text
/// 0 = theta_t + mu y (1 + theta_y) - gamma/2 (nu + jr eta2) y^2
///     + nu y^2 / 2 theta_yy + rho nu xi y theta_ynu
///     + k (nu_bar - nu) theta_nu + nu xi^2 / 2 theta_nunu
///     + jr E[theta(y (1 + eta)) - theta(y)]
///     + sum_z z m [lambda01 phi01 H01(p01) + lambda10 phi10 H10(p10)]
/// ```
///
/// with `p01 = (theta(y) - theta(y - z)) / z`, `p10 = (theta(y) - theta(y + z)) / z`
/// and zero terminal value.
pub fn solve_pide_heston_bates(
    model: &HestonBates,
    risk: &RiskParams,
    curve: &DemandCurve,
    nu_grid: Option<StateGrid1D>,
    opts: &PideOptions,
) -> Result<ThetaGrid> {
    opts.check()?;
    crate::riccati::check_horizon(risk.horizon, risk.gamma)?;
    let y = opts.y_grid(curve)?;
    let nu = match nu_grid {
        Some(g) => g,
        None => default_nu_grid(model, opts.aux_points)?,
    };
    if nu.lo < 0.0 {
        return Err(Error::InvalidInput(format!(
            "variance grid must start at >= 0 (got {})",
            nu.lo
        )));
    }
    let nodes = nu.nodes();
    let problem = Problem {
        model,
        gamma: risk.gamma,
        horizon: risk.horizon,
        ham: HamiltonianTerms::new(curve, opts.mode, opts.expansion_point)?,
        lambda: [curve.side01.lambda_height, curve.side10.lambda_height],
        y,
        nu,
        nu_op: LineOperator {
            grid: nu,
            axis: "nu",
            adv: nodes.iter().map(|&v| model.k * (model.nu_bar - v)).collect(),
            diff: nodes.iter().map(|&v| 0.5 * v * model.xi * model.xi).collect(),
            nonlocal: None,
        },
    };
    let (mut values, mut rate) = problem.march(opts.time_steps, opts.stored_slices)?;
    if opts.richardson {
        let (fine, r2) = problem.march(2 * opts.time_steps, opts.stored_slices)?;
        richardson_combine(&mut values, &fine);
        rate = rate.max(r2);
    }
    Ok(ThetaGrid {
        kind: ThetaKind::HestonBates,
        times: time_grid(risk.horizon, opts.stored_slices),
        y,
        aux: vec![nu],
        values,
        diagnostics: PideDiagnostics {
            time_steps: opts.time_steps,
            richardson: opts.richardson,
            explicit_dt_limit: if rate > 0.0 { 1.0 / rate } else { f64::INFINITY },
        },
    })
}
