use super::{check_horizon, check_i2, RiccatiOptions};
use crate::error::{Error, Result};
use crate::grid::time_grid;
use crate::hamiltonian::DemandMoments;
use crate::model::RiskParams;
use crate::surface::{SolverDiagnostics, SurfaceKind, ValueSurface};

/// Right-hand side of the constant-coefficient system in `tau`.
fn rhs(m: &DemandMoments, r: f64, c: f64, mu: f64, a: f64, b: f64) -> (f64, f64) {
    let da = -2.0 * m.i2 * a * a + r * a + c;
    let db = -mu * (1.0 - b) + 2.0 * a * m.j1 + 2.0 * a * a * m.j2 - 2.0 * a * b * m.i2;
    (da, db)
}

/// Constant-coefficient `A(t)`, `B(t)` for a constant quadratic-variation
/// rate `variance_rate` and price drift `mu`:
///
/// ```text
/// dA/dtau = -2 I2 A^2 + (2 mu + v) A + gamma v / 2
/// dB/dtau = -mu (1 - B) + 2 A J1 + 2 A^2 J2 - 2 I2 A B
/// ```
///
/// Integrated with classical RK4, sub-stepped so that `dt` stays well inside
/// the stability region of the linearised system.
pub fn solve_constant_ab(
    risk: &RiskParams,
    moments: &DemandMoments,
    variance_rate: f64,
    mu: f64,
    opts: &RiccatiOptions,
) -> Result<ValueSurface> {
    opts.check()?;
    check_horizon(risk.horizon, risk.gamma)?;
    check_i2(moments.i2)?;
    if !(variance_rate.is_finite() && variance_rate >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "variance rate must be >= 0 and drift finite (got {variance_rate}, {mu})"
        )));
    }
    let n = opts.time_steps;
    let r = 2.0 * mu + variance_rate;
    let c = 0.5 * risk.gamma * variance_rate;
    let d = (r * r + 8.0 * moments.i2 * c).sqrt();
    let dt_out = risk.horizon / n as f64;
    let scale = r.abs() + d + mu.abs() + moments.i2 + 1e-300;
    let sub = ((dt_out * scale / 0.02).ceil() as usize).max(1);
    let h = dt_out / sub as f64;

    let mut a = vec![0.0; n + 1];
    let mut b = vec![0.0; n + 1];
    let (mut x, mut y) = (0.0, 0.0);
    for k in 1..=n {
        for _ in 0..sub {
            let f = |a: f64, b: f64| rhs(moments, r, c, mu, a, b);
            let (k1a, k1b) = f(x, y);
            let (k2a, k2b) = f(x + 0.5 * h * k1a, y + 0.5 * h * k1b);
            let (k3a, k3b) = f(x + 0.5 * h * k2a, y + 0.5 * h * k2b);
            let (k4a, k4b) = f(x + h * k3a, y + h * k3b);
            x += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
            y += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        }
        a[n - k] = x;
        b[n - k] = if opts.skip_b { 0.0 } else { y };
    }
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::NonFinite("constant A/B solve".into()));
    }
    let diagnostics = SolverDiagnostics {
        time_steps: n * sub,
        min_a: a.iter().copied().fold(f64::INFINITY, f64::min),
        max_a: a.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ..Default::default()
    };
    Ok(ValueSurface {
        kind: SurfaceKind::Constant,
        times: time_grid(risk.horizon, n),
        axes: vec![],
        a,
        b,
        diagnostics,
    })
}
