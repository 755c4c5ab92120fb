use super::{check_horizon, constant_moments, with_richardson, Marched, RiccatiOptions, ShiftPolicy};
use crate::error::{Error, Result};
use crate::grid::{time_grid, StateGrid1D};
use crate::hamiltonian::DemandMoments;
use crate::model::{DemandCurve, RiskParams, ZHawkes};
use crate::surface::{SurfaceKind, ValueSurface};

/// `h in [0, h0 + 20 kappa nH]`, `xi in ±(|xi0| + 10 sqrt(2 nZ omega))`, with
/// an odd number of `xi` points so that `xi = 0` is a node.
pub fn default_zhawkes_grids(
    model: &ZHawkes,
    n_points: usize,
) -> Result<(StateGrid1D, StateGrid1D)> {
    let mut h_hi = model.h0 + 20.0 * model.kappa * model.n_h;
    if !(h_hi > 0.0) {
        h_hi = model.lambda_inf.max(1.0);
    }
    let mut xi_half = model.xi0.abs() + 10.0 * model.xi_jump();
    if !(xi_half > 0.0) {
        xi_half = 1.0;
    }
    let n_xi = n_points | 1;
    Ok((
        StateGrid1D::new(0.0, h_hi, n_points)?,
        StateGrid1D::new(-xi_half, xi_half, n_xi)?,
    ))
}

/// Bilinear stencil: four `(flat index, weight)` pairs.
type Bilinear = [(usize, f64); 4];

fn bilinear(h: &StateGrid1D, xi: &StateGrid1D, x: f64, y: f64) -> (Bilinear, bool) {
    let lh = h.locate(x);
    let lx = xi.locate(y);
    let nx = xi.n_points;
    let i = lh.index;
    let j = lx.index;
    let (u, v) = (lh.weight, lx.weight);
    (
        [
            (i * nx + j, (1.0 - u) * (1.0 - v)),
            (i * nx + j + 1, (1.0 - u) * v),
            ((i + 1) * nx + j, u * (1.0 - v)),
            ((i + 1) * nx + j + 1, u * v),
        ],
        lh.clamped || lx.clamped,
    )
}

fn eval(st: &Bilinear, v: &[f64]) -> f64 {
    st.iter().map(|&(k, w)| if w == 0.0 { 0.0 } else { w * v[k] }).sum()
}

struct ZhProblem {
    nh: usize,
    nx: usize,
    /// Sweep order: increasing `h`, then increasing `|xi|`.
    order: Vec<usize>,
    intensity: Vec<f64>,
    /// Upwind coefficient and implicit neighbour along each axis.
    adv_h: Vec<(f64, Option<usize>)>,
    adv_xi: Vec<(f64, Option<usize>)>,
    plus: Vec<Bilinear>,
    minus: Vec<Bilinear>,
    src_a: Vec<f64>,
    m2: (f64, f64),
    m1: (f64, f64),
    moments: DemandMoments,
    horizon: f64,
    skip_b: bool,
}

impl ZhProblem {
    fn march(&self, n_steps: usize) -> Marched {
        let ns = self.nh * self.nx;
        let dt = self.horizon / n_steps as f64;
        let m = self.moments;
        let mut a = vec![0.0; (n_steps + 1) * ns];
        let mut b = vec![0.0; (n_steps + 1) * ns];
        for k in 1..=n_steps {
            let (done, todo) = a.split_at_mut((n_steps - k + 1) * ns);
            let old = &todo[..ns];
            let new = &mut done[(n_steps - k) * ns..];
            for &s in &self.order {
                let lam = self.intensity[s];
                let (ch, nh) = self.adv_h[s];
                let (cx, nx) = self.adv_xi[s];
                let diag = 1.0 / dt + 2.0 * m.i2 * old[s] + lam + ch + cx;
                let mut rhs = old[s] / dt
                    + self.src_a[s]
                    + lam * (self.m2.0 * eval(&self.plus[s], old) + self.m2.1 * eval(&self.minus[s], old));
                if let Some(p) = nh {
                    rhs += ch * new[p];
                }
                if let Some(p) = nx {
                    rhs += cx * new[p];
                }
                new[s] = rhs / diag;
            }
        }
        if !self.skip_b {
            for k in 1..=n_steps {
                let an = a[(n_steps - k) * ns..(n_steps - k + 1) * ns].to_vec();
                let (done, todo) = b.split_at_mut((n_steps - k + 1) * ns);
                let old = &todo[..ns];
                let new = &mut done[(n_steps - k) * ns..];
                for &s in &self.order {
                    let lam = self.intensity[s];
                    let (ch, nh) = self.adv_h[s];
                    let (cx, nx) = self.adv_xi[s];
                    let diag = 1.0 / dt + 2.0 * m.i2 * an[s] + lam + ch + cx;
                    let mut rhs = old[s] / dt
                        + 2.0 * an[s] * m.j1
                        + 2.0 * an[s] * an[s] * m.j2
                        + lam * (self.m1.0 * eval(&self.plus[s], old) + self.m1.1 * eval(&self.minus[s], old));
                    if let Some(p) = nh {
                        rhs += ch * new[p];
                    }
                    if let Some(p) = nx {
                        rhs += cx * new[p];
                    }
                    new[s] = rhs / diag;
                }
            }
        }
        Marched {
            a,
            b,
            shift_clamps: 0,
            // Every row of the sweep is a positive diagonal against
            // nonnegative upwind weights.
            rows_checked: (2 * n_steps * ns) as u64,
        }
    }
}

/// `A(t, h, xi)`, `B(t, h, xi)` for the quadratic-Hawkes price with
/// intensity `L = lambda_inf + h + xi^2`; at each jump `h += kappa nH` and
/// `xi += ±s`, `s = sqrt(2 nZ omega)`, with the sign of the price move:
///
/// ```text
/// dA/dtau = -2 I2 A^2 - kappa h A_h - omega xi A_xi + gamma L eta2 / 2
///           + L (m2+ A(h', xi + s) + m2- A(h', xi - s) - A)
/// dB/dtau = -2 I2 A B - kappa h B_h - omega xi B_xi + 2 A J1 + 2 A^2 J2
///           + L (m1+ B(h', xi + s) + m1- B(h', xi - s) - B)
/// ```
///
/// where `h' = h + kappa nH` and `m1±`, `m2±` are the sign-split jump moments.
/// All advection flows toward `h = 0` and `xi = 0`, so the implicit upwind
/// system is triangular and is solved by a single ordered sweep.
pub fn solve_zhawkes_ab(
    model: &ZHawkes,
    risk: &RiskParams,
    curve: &DemandCurve,
    grids: Option<(StateGrid1D, StateGrid1D)>,
    opts: &RiccatiOptions,
) -> Result<ValueSurface> {
    opts.check()?;
    check_horizon(risk.horizon, risk.gamma)?;
    let ok = model.lambda_inf > 0.0
        && model.kappa > 0.0
        && model.omega >= 0.0
        && model.n_h >= 0.0
        && model.n_z >= 0.0
        && model.n_h + model.n_z < 1.0;
    if !ok {
        return Err(Error::InvalidInput(
            "Z-Hawkes parameters out of range for the A/B solve".into(),
        ));
    }
    let (hg, xg) = match grids {
        Some(g) => g,
        None => default_zhawkes_grids(model, opts.state_points)?,
    };
    if hg.lo != 0.0 {
        return Err(Error::InvalidInput(format!("h grid must start at 0 (got {})", hg.lo)));
    }
    if (xg.lo + xg.hi).abs() > 1e-12 * xg.hi.abs() || xg.n_points % 2 == 0 {
        return Err(Error::InvalidInput(
            "xi grid must be symmetric about 0 with an odd number of points".into(),
        ));
    }
    for (what, g, x) in [("h0", &hg, model.h0), ("xi0", &xg, model.xi0)] {
        if !g.contains(x) {
            return Err(Error::OutsideGrid {
                what: what.into(),
                value: x,
                lo: g.lo,
                hi: g.hi,
            });
        }
    }
    let moments = constant_moments(curve, opts)?;
    let jm = model.jumps.moments();
    let (nh, nx) = (hg.n_points, xg.n_points);
    let (dh, dx) = (hg.spacing(), xg.spacing());
    let centre = nx / 2;
    let s_jump = model.xi_jump();
    let h_shift = model.kappa * model.n_h;

    let mut order = Vec::with_capacity(nh * nx);
    for i in 0..nh {
        order.push(i * nx + centre);
        for d in 1..=centre {
            order.push(i * nx + centre + d);
            order.push(i * nx + centre - d);
        }
    }
    let mut intensity = vec![0.0; nh * nx];
    let mut adv_h = vec![(0.0, None); nh * nx];
    let mut adv_xi = vec![(0.0, None); nh * nx];
    let mut plus = Vec::with_capacity(nh * nx);
    let mut minus = Vec::with_capacity(nh * nx);
    let mut clamps = 0u64;
    for i in 0..nh {
        for j in 0..nx {
            let s = i * nx + j;
            let (h, xi) = (hg.node(i), xg.node(j));
            intensity[s] = model.intensity(h, xi);
            if i > 0 {
                adv_h[s] = (model.kappa * h / dh, Some(s - nx));
            }
            if j > centre {
                adv_xi[s] = (model.omega * xi.abs() / dx, Some(s - 1));
            } else if j < centre {
                adv_xi[s] = (model.omega * xi.abs() / dx, Some(s + 1));
            }
            for (sign, out) in [(1.0, &mut plus), (-1.0, &mut minus)] {
                let (st, clamped) = bilinear(&hg, &xg, h + h_shift, xi + sign * s_jump);
                if clamped {
                    if opts.shift_policy == ShiftPolicy::Reject {
                        return Err(Error::OutsideGrid {
                            what: "shifted (h, xi)".into(),
                            value: if hg.contains(h + h_shift) { xi + sign * s_jump } else { h + h_shift },
                            lo: if hg.contains(h + h_shift) { xg.lo } else { hg.lo },
                            hi: if hg.contains(h + h_shift) { xg.hi } else { hg.hi },
                        });
                    }
                    clamps += 1;
                }
                out.push(st);
            }
        }
    }
    let problem = ZhProblem {
        nh,
        nx,
        order,
        src_a: intensity
            .iter()
            .map(|&l| 0.5 * risk.gamma * l * jm.eta_bar_sq)
            .collect(),
        intensity,
        adv_h,
        adv_xi,
        plus,
        minus,
        m2: (jm.m2_plus, jm.m2_minus),
        m1: (jm.m1_plus, jm.m1_minus),
        moments,
        horizon: risk.horizon,
        skip_b: opts.skip_b,
    };
    let (a, b, mut diagnostics) =
        with_richardson(nh * nx, opts.time_steps, opts, |k| Ok(problem.march(k)))?;
    diagnostics.shift_clamps = clamps;
    Ok(ValueSurface {
        kind: SurfaceKind::ZHawkes,
        times: time_grid(risk.horizon, opts.time_steps),
        axes: vec![hg, xg],
        a,
        b,
        diagnostics,
    })
}
