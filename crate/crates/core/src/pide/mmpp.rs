use rayon::prelude::*;

use super::{
    cfl_check, check_finite, richardson_combine, y_sweep, HamiltonianTerms, PideDiagnostics,
    PideOptions, ThetaGrid, ThetaKind,
};
use crate::error::{Error, Result};
use crate::grid::{quadratic_interp, time_grid, StateGrid1D};
use crate::linalg::Lu;
use crate::model::{DemandCurve, Mmpp, RiskParams};

/// Solves for `theta_r(t, y)` per liquidity regime `r` under a GBM price:
///
/// ```text
/// 0 = theta_r,t + mu y (1 + theta_r,y) - gamma sigma^2 y^2 / 2 + sigma^2 y^2 / 2 theta_r,yy
///     + sum_k Q_rk theta_k + sum_z z m [l01_r phi01 H01(p01) + l10_r phi10 H10(p10)]
/// ```
///
/// Regime coupling is implicit: one `(I - dt Q)` solve per inventory node.
pub fn solve_pide_mmpp(
    liquidity: &Mmpp,
    risk: &RiskParams,
    curve: &DemandCurve,
    sigma: f64,
    mu: f64,
    opts: &PideOptions,
) -> Result<ThetaGrid> {
    opts.check()?;
    crate::riccati::check_horizon(risk.horizon, risk.gamma)?;
    let nr = liquidity.n_regimes();
    if nr == 0 || liquidity.rate_matrix.len() != nr || liquidity.rate_matrix.iter().any(|r| r.len() != nr) {
        return Err(Error::InvalidInput(format!("rate matrix must be {nr}x{nr}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidInput("sigma must be >= 0 and mu finite".into()));
    }
    let y = opts.y_grid(curve)?;
    let ham = HamiltonianTerms::new(curve, opts.mode, opts.expansion_point)?;
    let march = |n: usize| -> Result<(Vec<f64>, f64)> {
        let ny = y.n_points;
        let len = ny * nr;
        let dt = risk.horizon / n as f64;
        let every = n / opts.stored_slices;
        let hy = y.spacing();
        let ys = y.nodes();
        let c1: Vec<f64> = ys.iter().map(|v| mu * v).collect();
        let c2: Vec<f64> = ys.iter().map(|v| 0.5 * sigma * sigma * v * v).collect();
        let mut m = vec![0.0; nr * nr];
        for r in 0..nr {
            for k in 0..nr {
                m[r * nr + k] = if r == k { 1.0 } else { 0.0 } - dt * liquidity.rate_matrix[r][k];
            }
        }
        let lu = Lu::new(nr, m).ok_or_else(|| Error::NonFinite("singular regime coupling matrix".into()))?;
        let mut theta = vec![0.0; len];
        let mut stored = vec![0.0; (opts.stored_slices + 1) * len];
        let mut max_rate: f64 = 0.0;
        for step in 1..=n {
            let old = theta.clone();
            let rates: Vec<Result<f64>> = theta
                .par_chunks_mut(ny)
                .enumerate()
                .map(|(r, line)| {
                    let src = &old[r * ny..(r + 1) * ny];
                    let at = |x: f64| quadratic_interp(y.lo, hy, src, x);
                    let (l01, l10) = liquidity.intensities(r);
                    let mut max_rate: f64 = 0.0;
                    for i in 0..ny {
                        let yi = ys[i];
                        let (h, rate) = ham.node_rate([l01, l10], src[i], |z| at(yi - z), |z| at(yi + z))?;
                        line[i] += dt * (mu * yi + h - 0.5 * risk.gamma * sigma * sigma * yi * yi);
                        max_rate = max_rate.max(rate);
                    }
                    y_sweep(&y, dt, &c1, &c2, line);
                    Ok(max_rate)
                })
                .collect();
            for r in rates {
                let r = r?;
                cfl_check(dt, r, "explicit Hamiltonian terms of the MMPP PIDE")?;
                max_rate = max_rate.max(r);
            }
            let mut col = vec![0.0; nr];
            for i in 0..ny {
                for r in 0..nr {
                    col[r] = theta[r * ny + i];
                }
                let sol = lu.solve(&col);
                for r in 0..nr {
                    theta[r * ny + i] = sol[r];
                }
            }
            check_finite(&theta, step)?;
            if step % every == 0 {
                let s = opts.stored_slices - step / every;
                stored[s * len..(s + 1) * len].copy_from_slice(&theta);
            }
        }
        Ok((stored, max_rate))
    };
    let (mut values, mut rate) = march(opts.time_steps)?;
    if opts.richardson {
        let (fine, r2) = march(2 * opts.time_steps)?;
        richardson_combine(&mut values, &fine);
        rate = rate.max(r2);
    }
    Ok(ThetaGrid {
        kind: ThetaKind::Mmpp,
        times: time_grid(risk.horizon, opts.stored_slices),
        y,
        aux: vec![StateGrid1D {
            lo: 0.0,
            hi: (nr - 1).max(1) as f64,
            n_points: nr,
        }],
        values,
        diagnostics: PideDiagnostics {
            time_steps: opts.time_steps,
            richardson: opts.richardson,
            explicit_dt_limit: if rate > 0.0 { 1.0 / rate } else { f64::INFINITY },
        },
    })
}
