//! Logistic-demand Hamiltonians.
//!
//! With `f(d) = 1 / (1 + exp(a + b d))`, the optimised markup revenue
//! `H(p) = sup_d f(d) (d - p)` and its maximiser have closed forms in terms
//! of the principal Lambert W function evaluated at `exp(-(a + b p + 1))`:
//!
//! ```text
//! d*(p) = p + (1 + W) / b,   H = W / b,   H' = -W / (1 + W),   H'' = b W / (1 + W)^3
//! ```

use crate::error::{Error, Result};
use crate::model::{DemandCurve, DemandSide, Side};

/// Absolute tolerance on the first-order-condition residual.
pub const FOC_TOL: f64 = 1e-12;

/// Below this log-argument `W(e^l) = e^l - e^{2l} + O(e^{3l})` is exact in
/// double precision.
const LOG_SERIES_CUTOFF: f64 = -36.0;

pub fn logistic(a: f64, b: f64, delta: f64) -> f64 {
    let x = a + b * delta;
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Principal-branch `W(exp(l))`, i.e. the positive root of `w + ln w = l`.
///
/// Halley iteration on `g(w) = w + ln w - l`, seeded by `ln(1 + e^l)` for
/// moderate `l` and the asymptotic expansion `l - ln l + ln l / l` for
/// large `l`. Returns `None` if the iteration fails to meet [`FOC_TOL`].
pub fn lambert_w_of_exp(l: f64) -> Option<f64> {
    if !l.is_finite() {
        return None;
    }
    if l < LOG_SERIES_CUTOFF {
        let x = l.exp();
        return Some(x * (1.0 - x));
    }
    let mut w = if l <= 2.0 {
        l.exp().ln_1p()
    } else {
        let ll = l.ln();
        l - ll + ll / l
    };
    for _ in 0..50 {
        let g = w + w.ln() - l;
        let g1 = 1.0 + 1.0 / w;
        let g2 = -1.0 / (w * w);
        let step = 2.0 * g * g1 / (2.0 * g1 * g1 - g * g2);
        let next = w - step;
        // Halley can overshoot below zero from a poor seed; fall back to halving.
        w = if next > 0.0 { next } else { 0.5 * w };
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    let resid = w + w.ln() - l;
    (w > 0.0 && resid.abs() <= FOC_TOL * l.abs().max(1.0)).then_some(w)
}

/// Safeguarded Newton on the first-order condition written in the distance
/// `d = delta - p`: `h(d) = b d - 1 - exp(-c - b d)`, `c = a + b p`.
/// `h` is increasing with `h(0) < 0`, so a doubling bracket always exists.
fn newton_foc(c: f64, b: f64) -> Option<f64> {
    let h = |d: f64| b * d - 1.0 - (-c - b * d).exp();
    let dh = |d: f64| b + b * (-c - b * d).exp();
    let mut lo = 0.0;
    let mut hi = 1.0 / b;
    while h(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return None;
        }
    }
    let mut d = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = h(d);
        if v.abs() <= FOC_TOL * (1.0 + b * d) {
            return Some(d);
        }
        if v < 0.0 {
            lo = d;
        } else {
            hi = d;
        }
        let nd = d - v / dh(d);
        d = if nd > lo && nd < hi { nd } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Some(d);
        }
    }
    Some(d)
}

/// All quantities of the Hamiltonian at one `(a, b, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianPoint {
    /// `W(exp(-(a + b p + 1)))`.
    pub w: f64,
    pub delta: f64,
    pub h: f64,
    pub dh: f64,
    pub d2h: f64,
}

fn check_inputs(a: f64, b: f64, p: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && p.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite Hamiltonian input (a={a}, b={b}, p={p})"
        )));
    }
    if b <= 0.0 {
        return Err(Error::InvalidInput(format!("logistic slope b must be > 0 (got {b})")));
    }
    Ok(())
}

pub fn evaluate(a: f64, b: f64, p: f64) -> Result<HamiltonianPoint> {
    check_inputs(a, b, p)?;
    let c = a + b * p;
    let w = match lambert_w_of_exp(-(c + 1.0)) {
        Some(w) => w,
        None => {
            let d = newton_foc(c, b).ok_or_else(|| {
                Error::NonFinite(format!("optimal markup search failed (a={a}, b={b}, p={p})"))
            })?;
            (b * d - 1.0).max(0.0)
        }
    };
    let one_w = 1.0 + w;
    Ok(HamiltonianPoint {
        w,
        delta: p + one_w / b,
        h: w / b,
        dh: -w / one_w,
        d2h: b * w / (one_w * one_w * one_w),
    })
}

/// Unique maximiser of `f(d) (d - p)`.
pub fn optimal_delta(a: f64, b: f64, p: f64) -> Result<f64> {
    evaluate(a, b, p).map(|v| v.delta)
}

pub fn hamiltonian(a: f64, b: f64, p: f64) -> Result<f64> {
    evaluate(a, b, p).map(|v| v.h)
}

pub fn hamiltonian_dp(a: f64, b: f64, p: f64) -> Result<f64> {
    evaluate(a, b, p).map(|v| v.dh)
}

pub fn hamiltonian_dpp(a: f64, b: f64, p: f64) -> Result<f64> {
    evaluate(a, b, p).map(|v| v.d2h)
}

/// Coefficients of the quadratic model `H(p) ~ alpha0 + alpha1 p + alpha2 p^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Alpha {
    pub fn eval(&self, p: f64) -> f64 {
        self.alpha0 + p * (self.alpha1 + 0.5 * self.alpha2 * p)
    }

    pub fn derivative(&self, p: f64) -> f64 {
        self.alpha1 + self.alpha2 * p
    }
}

/// Taylor coefficients of `H` around `p0`, rewritten as a polynomial in `p`.
pub fn taylor_alpha(a: f64, b: f64, p0: f64) -> Result<Alpha> {
    let v = evaluate(a, b, p0)?;
    Ok(Alpha {
        alpha0: v.h - v.dh * p0 + 0.5 * v.d2h * p0 * p0,
        alpha1: v.dh - v.d2h * p0,
        alpha2: v.d2h,
    })
}

/// Per-size quadratic coefficients for one side.
pub fn quadratic_coeffs(side: &DemandSide, p0: f64) -> Result<Vec<Alpha>> {
    side.a
        .iter()
        .zip(&side.b)
        .map(|(&a, &b)| taylor_alpha(a, b, p0))
        .collect()
}

/// Quadratic coefficients for both sides of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCoeffs {
    pub expansion_point: f64,
    pub side01: Vec<Alpha>,
    pub side10: Vec<Alpha>,
}

impl QuadraticCoeffs {
    pub fn new(curve: &DemandCurve, expansion_point: f64) -> Result<Self> {
        Ok(Self {
            expansion_point,
            side01: quadratic_coeffs(&curve.side01, expansion_point)?,
            side10: quadratic_coeffs(&curve.side10, expansion_point)?,
        })
    }

    pub fn side(&self, side: Side) -> &[Alpha] {
        match side {
            Side::ZeroOne => &self.side01,
            Side::OneZero => &self.side10,
        }
    }
}

/// Aggregated demand moments entering every A/B system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DemandMoments {
    pub i2: f64,
    pub j1: f64,
    pub j2: f64,
}

/// Per-side partial sums of the moments with unit intensity. The moments are
/// linear in the two intensities, so any `(lambda01, lambda10)` is a cheap
/// combination of these.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBasis {
    /// `sum z phi alpha2 m`, per side.
    pub z_alpha2: [f64; 2],
    /// `sum z phi alpha1 m`, per side.
    pub z_alpha1: [f64; 2],
    /// `sum z^2 phi alpha2 m`, per side.
    pub z2_alpha2: [f64; 2],
}

impl MomentBasis {
    pub fn new(curve: &DemandCurve, coeffs: &QuadraticCoeffs) -> Self {
        let mut out = MomentBasis {
            z_alpha2: [0.0; 2],
            z_alpha1: [0.0; 2],
            z2_alpha2: [0.0; 2],
        };
        for side in Side::BOTH {
            let s = side.index();
            let d = curve.side(side);
            for (k, al) in coeffs.side(side).iter().enumerate() {
                let z = curve.grid.sizes[k];
                let w = d.phi[k] * curve.grid.weights[k];
                out.z_alpha2[s] += z * w * al.alpha2;
                out.z_alpha1[s] += z * w * al.alpha1;
                out.z2_alpha2[s] += z * z * w * al.alpha2;
            }
        }
        out
    }

    pub fn at(&self, lambda01: f64, lambda10: f64) -> DemandMoments {
        DemandMoments {
            i2: lambda01 * self.z_alpha2[0] + lambda10 * self.z_alpha2[1],
            j1: lambda01 * self.z_alpha1[0] - lambda10 * self.z_alpha1[1],
            j2: lambda01 * self.z2_alpha2[0] - lambda10 * self.z2_alpha2[1],
        }
    }
}

pub fn demand_moments(
    curve: &DemandCurve,
    coeffs: &QuadraticCoeffs,
    lambda01: f64,
    lambda10: f64,
) -> DemandMoments {
    MomentBasis::new(curve, coeffs).at(lambda01, lambda10)
}

/// Moments at the curve's own intensity heights.
pub fn curve_moments(curve: &DemandCurve, coeffs: &QuadraticCoeffs) -> DemandMoments {
    demand_moments(
        curve,
        coeffs,
        curve.side01.lambda_height,
        curve.side10.lambda_height,
    )
}

/// Markup revenue rate `sum_k z lambda phi H(z, 0) m` over both sides: the
/// value growth rate when inventory carries no risk.
pub fn myopic_revenue_rate(curve: &DemandCurve, lambda01: f64, lambda10: f64) -> Result<f64> {
    let mut total = 0.0;
    for (side, lambda) in [(Side::ZeroOne, lambda01), (Side::OneZero, lambda10)] {
        let d = curve.side(side);
        for k in 0..curve.grid.len() {
            let h = hamiltonian(d.a[k], d.b[k], 0.0)?;
            total += curve.grid.sizes[k] * lambda * d.phi[k] * h * curve.grid.weights[k];
        }
    }
    Ok(total)
}
