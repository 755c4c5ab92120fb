use super::{
    check_horizon, constant_moments, shift_stencils, with_richardson, LineOperator, LineProblem,
    RiccatiOptions,
};
use crate::error::{Error, Result};
use crate::grid::{time_grid, StateGrid1D};
use crate::model::{DemandCurve, HawkesPrice, RiskParams};
use crate::surface::{SurfaceKind, ValueSurface};

/// `[lambda_inf, lambda0 + 20 beta n]`.
pub fn default_lambda_grid(model: &HawkesPrice, n_points: usize) -> Result<StateGrid1D> {
    let lo = model.lambda_inf;
    let mut hi = model.lambda0 + 20.0 * model.beta * model.n;
    if !(hi - lo > 1e-12 * lo.max(1.0)) {
        hi = lo + lo.max(1.0);
    }
    StateGrid1D::new(lo, hi, n_points)
}

/// `A(t, lambda)`, `B(t, lambda)` for a pure-jump price whose jump intensity
/// `lambda` is Hawkes with exponential kernel:
///
/// ```text
/// dA/dtau = -2 I2 A^2 - beta (lambda - lambda_inf) A_lambda
///           + lambda ((1 + eta2) A(lambda + beta n) - A) + gamma lambda eta2 / 2
/// dB/dtau = -2 I2 A B - beta (lambda - lambda_inf) B_lambda
///           + lambda (B(lambda + beta n) - B) + 2 A J1 + 2 A^2 J2
/// ```
pub fn solve_hawkes_price_ab(
    model: &HawkesPrice,
    risk: &RiskParams,
    curve: &DemandCurve,
    grid: Option<StateGrid1D>,
    opts: &RiccatiOptions,
) -> Result<ValueSurface> {
    opts.check()?;
    check_horizon(risk.horizon, risk.gamma)?;
    if !(model.lambda_inf > 0.0 && model.beta > 0.0 && model.n >= 0.0 && model.n < 1.0) {
        return Err(Error::InvalidInput(
            "Hawkes price parameters out of range for the A/B solve".into(),
        ));
    }
    let grid = match grid {
        Some(g) => g,
        None => default_lambda_grid(model, opts.state_points)?,
    };
    if (grid.lo - model.lambda_inf).abs() > 1e-12 * model.lambda_inf.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "intensity grid must start at lambda_inf = {} (got {})",
            model.lambda_inf, grid.lo
        )));
    }
    if !grid.contains(model.lambda0) {
        return Err(Error::OutsideGrid {
            what: "lambda0".into(),
            value: model.lambda0,
            lo: grid.lo,
            hi: grid.hi,
        });
    }
    let moments = constant_moments(curve, opts)?;
    let eta2 = model.jumps.moments().eta_bar_sq;
    let (stencils, clamps) =
        shift_stencils(&grid, model.beta * model.n, opts.shift_policy, "lambda + beta n")?;
    let nodes = grid.nodes();
    let n = nodes.len();
    let adv: Vec<f64> = nodes
        .iter()
        .map(|&l| -model.beta * (l - model.lambda_inf))
        .collect();
    let op = |coef: Vec<f64>| LineOperator {
        grid,
        axis: "lambda",
        adv: adv.clone(),
        diff: vec![0.0; n],
        nonlocal: Some((coef, stencils.clone())),
    };
    let problem = LineProblem {
        op_a: op(nodes.iter().map(|&l| l * (1.0 + eta2)).collect()),
        op_b: op(nodes.clone()),
        rate_a: nodes.iter().map(|&l| -l).collect(),
        src_a: nodes.iter().map(|&l| 0.5 * risk.gamma * l * eta2).collect(),
        rate_b: nodes.iter().map(|&l| -l).collect(),
        src_b: vec![0.0; n],
        moments,
        horizon: risk.horizon,
        skip_b: opts.skip_b,
    };
    let (a, b, mut diagnostics) =
        with_richardson(n, opts.time_steps, opts, |k| problem.march(k))?;
    diagnostics.shift_clamps = clamps;
    Ok(ValueSurface {
        kind: SurfaceKind::HawkesPrice,
        times: time_grid(risk.horizon, opts.time_steps),
        axes: vec![grid],
        a,
        b,
        diagnostics,
    })
}
