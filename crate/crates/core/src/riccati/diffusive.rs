use super::{
    check_horizon, constant_moments, with_richardson, LineOperator, LineProblem, RiccatiOptions,
};
use crate::error::{Error, Result};
use crate::grid::{time_grid, StateGrid1D};
use crate::model::{DemandCurve, HestonBates, RiskParams, SteinSteinJump};
use crate::surface::{SurfaceKind, ValueSurface};

/// `[0, nu_bar + 8 xi sqrt(nu_bar / 2k)]`, with `nu_bar` on a node. Falls
/// back to `[0, 2 nu_bar]` when the variance does not diffuse.
pub fn default_nu_grid(model: &HestonBates, n_points: usize) -> Result<StateGrid1D> {
    let spread = 8.0 * model.xi * (model.nu_bar / (2.0 * model.k)).sqrt();
    let mut hi = model.nu_bar + spread;
    hi = hi.max(model.nu0 * 1.25);
    if !(hi > 0.0 && spread > 0.0) {
        hi = (2.0 * model.nu_bar).max(1.25 * model.nu0).max(1e-4);
    }
    StateGrid1D::anchored(0.0, hi, n_points, model.nu_bar)
}

/// `sigma_bar ± 6 xi / sqrt(2k)`, widened to contain `sigma0`. Odd point
/// counts put `sigma_bar` on the central node.
pub fn default_sigma_grid(model: &SteinSteinJump, n_points: usize) -> Result<StateGrid1D> {
    let mut half = 6.0 * model.xi / (2.0 * model.k).sqrt();
    half = half.max(1.25 * (model.sigma0 - model.sigma_bar).abs());
    if !(half > 0.0) {
        half = model.sigma_bar.abs().max(1e-2);
    }
    StateGrid1D::new(model.sigma_bar - half, model.sigma_bar + half, n_points)
}

fn check_common(mu: f64, k: f64, xi: f64, rho: f64, jump_rate: f64) -> Result<()> {
    let ok = mu.is_finite()
        && k.is_finite()
        && k >= 0.0
        && xi.is_finite()
        && xi >= 0.0
        && (-1.0..=1.0).contains(&rho)
        && jump_rate.is_finite()
        && jump_rate >= 0.0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(
            "price-model parameters out of range for the A/B solve".into(),
        ))
    }
}

struct Diffusive {
    kind: SurfaceKind,
    axis: &'static str,
    mu: f64,
    grid: StateGrid1D,
    /// Advection of the `A` and `B` equations, diffusion, variance rate per node.
    adv_a: Vec<f64>,
    adv_b: Vec<f64>,
    diff: Vec<f64>,
    var: Vec<f64>,
}

fn solve(
    d: Diffusive,
    risk: &RiskParams,
    curve: &DemandCurve,
    opts: &RiccatiOptions,
) -> Result<ValueSurface> {
    opts.check()?;
    check_horizon(risk.horizon, risk.gamma)?;
    let moments = constant_moments(curve, opts)?;
    let n = d.grid.n_points;
    let op = |adv: Vec<f64>| LineOperator {
        grid: d.grid,
        axis: d.axis,
        adv,
        diff: d.diff.clone(),
        nonlocal: None,
    };
    let problem = LineProblem {
        op_a: op(d.adv_a.clone()),
        op_b: op(d.adv_b.clone()),
        rate_a: d.var.iter().map(|v| 2.0 * d.mu + v).collect(),
        src_a: d.var.iter().map(|v| 0.5 * risk.gamma * v).collect(),
        rate_b: vec![d.mu; n],
        src_b: vec![-d.mu; n],
        moments,
        horizon: risk.horizon,
        skip_b: opts.skip_b,
    };
    let (a, b, diagnostics) = with_richardson(n, opts.time_steps, opts, |k| problem.march(k))?;
    Ok(ValueSurface {
        kind: d.kind,
        times: time_grid(risk.horizon, opts.time_steps),
        axes: vec![d.grid],
        a,
        b,
        diagnostics,
    })
}

/// `A(t, nu)`, `B(t, nu)` under Heston dynamics with compound-Poisson jumps:
///
/// ```text
/// dA/dtau = -2 I2 A^2 + (2 mu + nu + jr eta2) A + (2 rho xi nu + k (nu_bar - nu)) A_nu
///           + nu xi^2 / 2 A_nunu + gamma (nu + jr eta2) / 2
/// dB/dtau = -mu + (mu - 2 I2 A) B + (rho xi nu + k (nu_bar - nu)) B_nu
///           + nu xi^2 / 2 B_nunu + 2 A J1 + 2 A^2 J2
/// ```
pub fn solve_heston_bates_ab(
    model: &HestonBates,
    risk: &RiskParams,
    curve: &DemandCurve,
    grid: Option<StateGrid1D>,
    opts: &RiccatiOptions,
) -> Result<ValueSurface> {
    check_common(model.mu, model.k, model.xi, model.rho, model.jump_rate)?;
    let grid = match grid {
        Some(g) => g,
        None => default_nu_grid(model, opts.state_points)?,
    };
    if grid.lo < 0.0 {
        return Err(Error::InvalidInput(format!(
            "variance grid must start at >= 0 (got {})",
            grid.lo
        )));
    }
    let jump_var = model.jump_rate * model.jumps.moments().eta_bar_sq;
    let nodes = grid.nodes();
    let d = Diffusive {
        kind: SurfaceKind::HestonBates,
        axis: "nu",
        mu: model.mu,
        grid,
        adv_a: nodes
            .iter()
            .map(|&v| 2.0 * model.rho * v * model.xi + model.k * (model.nu_bar - v))
            .collect(),
        adv_b: nodes
            .iter()
            .map(|&v| model.rho * v * model.xi + model.k * (model.nu_bar - v))
            .collect(),
        diff: nodes.iter().map(|&v| 0.5 * v * model.xi * model.xi).collect(),
        var: nodes.iter().map(|&v| v + jump_var).collect(),
    };
    solve(d, risk, curve, opts)
}

/// `A(t, sigma)`, `B(t, sigma)` under Stein-Stein volatility with jumps:
/// as the Heston-Bates system with variance `sigma^2 + jr eta2`, advection
/// `2 rho xi sigma + k (sigma_bar - sigma)` (`A`) / `rho xi sigma + ...`
/// (`B`) and constant diffusion `xi^2 / 2`.
pub fn solve_stein_stein_ab(
    model: &SteinSteinJump,
    risk: &RiskParams,
    curve: &DemandCurve,
    grid: Option<StateGrid1D>,
    opts: &RiccatiOptions,
) -> Result<ValueSurface> {
    check_common(model.mu, model.k, model.xi, model.rho, model.jump_rate)?;
    let grid = match grid {
        Some(g) => g,
        None => default_sigma_grid(model, opts.state_points)?,
    };
    let jump_var = model.jump_rate * model.jumps.moments().eta_bar_sq;
    let nodes = grid.nodes();
    let d = Diffusive {
        kind: SurfaceKind::SteinSteinJump,
        axis: "sigma",
        mu: model.mu,
        grid,
        adv_a: nodes
            .iter()
            .map(|&s| 2.0 * model.rho * s * model.xi + model.k * (model.sigma_bar - s))
            .collect(),
        adv_b: nodes
            .iter()
            .map(|&s| model.rho * s * model.xi + model.k * (model.sigma_bar - s))
            .collect(),
        diff: vec![0.5 * model.xi * model.xi; nodes.len()],
        var: nodes.iter().map(|&s| s * s + jump_var).collect(),
    };
    solve(d, risk, curve, opts)
}
