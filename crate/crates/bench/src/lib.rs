//! Shared fixtures for the criterion benchmarks.

use ammq_core::*;

/// Three trade sizes with mildly asymmetric sides.
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

pub fn risk() -> RiskParams {
    RiskParams {
        gamma: 1.0,
        horizon: 1.0,
    }
}
