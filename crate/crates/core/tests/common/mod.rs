#![allow(dead_code)]

use ammq_core::hamiltonian::{QuadraticCoeffs, DemandMoments, demand_moments};
use ammq_core::*;

/// Riccati `A' = -2 I2 A^2 + r A + c`, `A(0) = 0`, in time to maturity.
pub fn riccati_closed_form(tau: f64, i2: f64, r: f64, c: f64) -> f64 {
    let d = (r * r + 8.0 * i2 * c).sqrt();
    let th = (0.5 * d * tau).tanh();
    if d == 0.0 {
        return 0.0;
    }
    2.0 * c * th / (d - r * th)
}

/// Independent RK4 on a scalar ODE with many steps.
pub fn rk4<F: Fn(f64) -> f64>(f: F, tau: f64, steps: usize) -> f64 {
    let h = tau / steps as f64;
    let mut x = 0.0;
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

/// Three sizes, mildly asymmetric sides.
pub fn desk_curve() -> DemandCurve {
    DemandCurve {
        grid: SizeGrid {
            sizes: vec![0.5, 1.0, 2.0],
            weights: vec![1.0, 1.0, 1.0],
        },
        side01: DemandSide {
            lambda_height: 20.0,
            phi: vec![0.5, 0.3, 0.2],
            a: vec![-0.5, -0.3, 0.0],
            b: vec![8.0, 8.0, 8.0],
        },
        side10: DemandSide {
            lambda_height: 18.0,
            phi: vec![0.5, 0.3, 0.2],
            a: vec![-0.4, -0.3, 0.1],
            b: vec![8.0, 8.0, 8.0],
        },
    }
}

pub fn symmetric_curve() -> DemandCurve {
    DemandCurve::symmetric_single(1.0, 1.0, 0.0, 1.0)
}

pub fn moments(curve: &DemandCurve) -> DemandMoments {
    let c = QuadraticCoeffs::new(curve, 0.0).unwrap();
    demand_moments(curve, &c, curve.side01.lambda_height, curve.side10.lambda_height)
}

pub fn heston_bates() -> HestonBates {
    HestonBates {
        mu: 0.0,
        k: 2.0,
        nu_bar: 0.04,
        xi: 0.3,
        rho: -0.5,
        nu0: 0.04,
        jump_rate: 1.0,
        jumps: JumpMeasure::symmetric(0.05),
    }
}

pub fn stein_stein() -> SteinSteinJump {
    SteinSteinJump {
        mu: 0.0,
        k: 2.0,
        sigma_bar: 0.2,
        xi: 0.1,
        rho: -0.3,
        sigma0: 0.2,
        jump_rate: 1.0,
        jumps: JumpMeasure::symmetric(0.05),
    }
}

pub fn hawkes() -> HawkesPrice {
    HawkesPrice {
        lambda_inf: 10.0,
        beta: 5.0,
        n: 0.5,
        lambda0: 12.0,
        jumps: JumpMeasure::symmetric(0.01),
    }
}

pub fn zhawkes() -> ZHawkes {
    ZHawkes {
        lambda_inf: 10.0,
        kappa: 5.0,
        omega: 2.0,
        n_h: 0.4,
        n_z: 0.2,
        h0: 1.0,
        xi0: 0.0,
        jumps: JumpMeasure::symmetric(0.01),
    }
}

pub fn risk(gamma: f64, horizon: f64) -> RiskParams {
    RiskParams { gamma, horizon }
}

pub fn two_level_mmpp(scale: f64) -> Mmpp {
    // Both sides switch independently between levels 0.5 and 2.0.
    let (up, down) = (1.0 * scale, 2.0 * scale);
    let mut q = vec![vec![0.0; 4]; 4];
    for r in 0..4 {
        let (j01, j10) = (r / 2, r % 2);
        let flip01 = (1 - j01) * 2 + j10;
        let flip10 = j01 * 2 + (1 - j10);
        q[r][flip01] += if j01 == 0 { up } else { down };
        q[r][flip10] += if j10 == 0 { up } else { down };
        q[r][r] = -(q[r][flip01] + q[r][flip10]);
    }
    Mmpp {
        levels: vec![0.5, 2.0],
        rate_matrix: q,
        initial_state: 0,
    }
}
