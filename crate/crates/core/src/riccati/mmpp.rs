use super::{check_horizon, check_i2, moment_basis, RiccatiOptions};
use crate::error::{Error, Result};
use crate::grid::{time_grid, StateGrid1D};
use crate::hamiltonian::DemandMoments;
use crate::model::{DemandCurve, Mmpp, RiskParams};
use crate::surface::{SolverDiagnostics, SurfaceKind, ValueSurface};

struct System<'a> {
    q: &'a [Vec<f64>],
    m: Vec<DemandMoments>,
    r: f64,
    c: f64,
    mu: f64,
}

impl System<'_> {
    /// `d/dtau` of `(A, B)` stacked as `[A_0..A_n, B_0..B_n]`.
    fn rhs(&self, x: &[f64], out: &mut [f64]) {
        let n = self.m.len();
        let (a, b) = x.split_at(n);
        for j in 0..n {
            let m = &self.m[j];
            let qa: f64 = self.q[j].iter().zip(a).map(|(q, v)| q * v).sum();
            let qb: f64 = self.q[j].iter().zip(b).map(|(q, v)| q * v).sum();
            out[j] = -2.0 * m.i2 * a[j] * a[j] + self.r * a[j] + self.c + qa;
            out[n + j] = -self.mu * (1.0 - b[j]) + qb + 2.0 * a[j] * m.j1
                + 2.0 * a[j] * a[j] * m.j2
                - 2.0 * a[j] * b[j] * m.i2;
        }
    }
}

/// `A_r(t)`, `B_r(t)` per liquidity regime `r` for a GBM price with
/// Markov-modulated demand intensities:
///
/// ```text
/// dA_r/dtau = -2 I2_r A_r^2 + (2 mu + sigma^2) A_r + gamma sigma^2 / 2 + sum_k Q_rk A_k
/// dB_r/dtau = -mu (1 - B_r) + sum_k Q_rk B_k + 2 A_r J1_r + 2 A_r^2 J2_r - 2 I2_r A_r B_r
/// ```
///
/// where the moments of regime `r` are evaluated at its pair of intensities.
/// Classical RK4, sub-stepped against the fastest regime switching rate.
pub fn solve_mmpp_ab(
    liquidity: &Mmpp,
    risk: &RiskParams,
    curve: &DemandCurve,
    sigma: f64,
    mu: f64,
    opts: &RiccatiOptions,
) -> Result<ValueSurface> {
    opts.check()?;
    check_horizon(risk.horizon, risk.gamma)?;
    let n = liquidity.n_regimes();
    if n == 0 || liquidity.rate_matrix.len() != n || liquidity.rate_matrix.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput(format!(
            "rate matrix must be {n}x{n} for {} levels",
            liquidity.n_levels()
        )));
    }
    if !(sigma.is_finite() && sigma >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidInput("sigma must be >= 0 and mu finite".into()));
    }
    let basis = moment_basis(curve, opts)?;
    let moments: Vec<DemandMoments> = (0..n)
        .map(|r| {
            let (l01, l10) = liquidity.intensities(r);
            basis.at(l01, l10)
        })
        .collect();
    for m in &moments {
        check_i2(m.i2)?;
    }
    let var = sigma * sigma;
    let sys = System {
        q: &liquidity.rate_matrix,
        r: 2.0 * mu + var,
        c: 0.5 * risk.gamma * var,
        mu,
        m: moments,
    };
    let steps = opts.time_steps;
    let dt_out = risk.horizon / steps as f64;
    let q_max = (0..n).map(|i| liquidity.rate_matrix[i][i].abs()).fold(0.0, f64::max);
    let d_max = sys
        .m
        .iter()
        .map(|m| (sys.r * sys.r + 8.0 * m.i2 * sys.c).sqrt() + 2.0 * m.i2)
        .fold(0.0, f64::max);
    let scale = 2.0 * q_max + sys.r.abs() + d_max + mu.abs() + 1e-300;
    let sub = ((dt_out * scale / 0.02).ceil() as usize).max(1);
    let h = dt_out / sub as f64;

    let mut a = vec![0.0; (steps + 1) * n];
    let mut b = vec![0.0; (steps + 1) * n];
    let mut x = vec![0.0; 2 * n];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; 2 * n], vec![0.0; 2 * n], vec![0.0; 2 * n], vec![0.0; 2 * n]);
    let mut tmp = vec![0.0; 2 * n];
    for k in 1..=steps {
        for _ in 0..sub {
            sys.rhs(&x, &mut k1);
            for i in 0..2 * n {
                tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            sys.rhs(&tmp, &mut k2);
            for i in 0..2 * n {
                tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            sys.rhs(&tmp, &mut k3);
            for i in 0..2 * n {
                tmp[i] = x[i] + h * k3[i];
            }
            sys.rhs(&tmp, &mut k4);
            for i in 0..2 * n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let j = steps - k;
        a[j * n..(j + 1) * n].copy_from_slice(&x[..n]);
        if !opts.skip_b {
            b[j * n..(j + 1) * n].copy_from_slice(&x[n..]);
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("MMPP A/B solve".into()));
    }
    let diagnostics = SolverDiagnostics {
        time_steps: steps * sub,
        min_a: a.iter().copied().fold(f64::INFINITY, f64::min),
        max_a: a.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ..Default::default()
    };
    let axis = StateGrid1D {
        lo: 0.0,
        hi: (n - 1).max(1) as f64,
        n_points: n,
    };
    Ok(ValueSurface {
        kind: SurfaceKind::Mmpp,
        times: time_grid(risk.horizon, steps),
        axes: vec![axis],
        a,
        b,
        diagnostics,
    })
}
