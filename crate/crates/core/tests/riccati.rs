mod common;

use ammq_core::riccati::*;
use ammq_core::*;
use common::*;

fn scalar_a0(curve: &DemandCurve, gamma: f64, horizon: f64, v: f64, mu: f64) -> f64 {
    let m = moments(curve);
    let r = 2.0 * mu + v;
    let c = 0.5 * gamma * v;
    riccati_closed_form(horizon, m.i2, r, c)
}

#[test]
fn constant_solver_matches_general_closed_form() {
    let curve = desk_curve();
    let m = moments(&curve);
    for &(gamma, v, mu) in &[(1.0, 0.04, 0.0), (3.0, 0.2, 0.05), (0.5, 0.01, -0.1)] {
        let s = solve_constant_ab(&risk(gamma, 2.0), &m, v, mu, &Default::default()).unwrap();
        for (j, &t) in s.times.iter().enumerate() {
            let exact = riccati_closed_form(2.0 - t, m.i2, 2.0 * mu + v, 0.5 * gamma * v);
            assert!((s.a[j] - exact).abs() < 1e-10, "t={t} got {} want {exact}", s.a[j]);
        }
        assert_eq!(s.a[s.times.len() - 1], 0.0);
    }
}

#[test]
fn constant_b_matches_independent_integration() {
    let curve = desk_curve();
    let m = moments(&curve);
    let (gamma, v, mu, t_end) = (2.0, 0.09, 0.03, 1.5);
    let s = solve_constant_ab(&risk(gamma, t_end), &m, v, mu, &Default::default()).unwrap();
    // Integrate the pair jointly with a different step count.
    let steps = 20_000;
    let h = t_end / steps as f64;
    let (mut a, mut b) = (0.0f64, 0.0f64);
    let f = |a: f64, b: f64| {
        (
            -2.0 * m.i2 * a * a + (2.0 * mu + v) * a + 0.5 * gamma * v,
            -mu + mu * b + 2.0 * a * m.j1 + 2.0 * a * a * m.j2 - 2.0 * a * b * m.i2,
        )
    };
    for _ in 0..steps {
        let (k1a, k1b) = f(a, b);
        let (k2a, k2b) = f(a + 0.5 * h * k1a, b + 0.5 * h * k1b);
        let (k3a, k3b) = f(a + 0.5 * h * k2a, b + 0.5 * h * k2b);
        let (k4a, k4b) = f(a + h * k3a, b + h * k3b);
        a += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        b += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
    }
    assert!((s.a[0] - a).abs() < 1e-10);
    assert!((s.b[0] - b).abs() < 1e-10, "{} vs {b}", s.b[0]);
    assert!(m.j1 != 0.0 && s.b[0] != 0.0);
}

#[test]
fn heston_bates_without_vol_of_vol_reduces_to_scalar() {
    let curve = desk_curve();
    let mut model = heston_bates();
    model.xi = 0.0;
    model.rho = 0.7;
    let rk = risk(1.0, 1.0);
    let s = solve_heston_bates_ab(&model, &rk, &curve, None, &Default::default()).unwrap();
    let i = s.axes[0].nearest(model.nu_bar);
    assert_eq!(s.axes[0].node(i), model.nu_bar);
    let v = model.nu_bar + model.jump_rate * model.jumps.moments().eta_bar_sq;
    let want = scalar_a0(&curve, 1.0, 1.0, v, 0.0);
    assert!((s.a_at(0, i) - want).abs() < 1e-6, "{} vs {want}", s.a_at(0, i));
}

#[test]
fn stein_stein_without_vol_of_vol_reduces_to_scalar() {
    let curve = desk_curve();
    let mut model = stein_stein();
    model.xi = 0.0;
    let rk = risk(2.0, 1.0);
    let s = solve_stein_stein_ab(&model, &rk, &curve, None, &Default::default()).unwrap();
    let i = s.axes[0].nearest(model.sigma_bar);
    assert!((s.axes[0].node(i) - model.sigma_bar).abs() < 1e-15);
    let v = model.sigma_bar.powi(2) + model.jump_rate * model.jumps.moments().eta_bar_sq;
    let want = scalar_a0(&curve, 2.0, 1.0, v, 0.0);
    assert!((s.a_at(0, i) - want).abs() < 1e-6);
}

#[test]
fn stein_stein_symmetric_demand_has_zero_b() {
    let s = solve_stein_stein_ab(
        &stein_stein(),
        &risk(1.0, 1.0),
        &symmetric_curve(),
        None,
        &Default::default(),
    )
    .unwrap();
    assert!(s.b.iter().all(|&b| b == 0.0));
    assert!(s.a.iter().all(|&a| a >= 0.0));
}

#[test]
fn zero_risk_and_drift_give_exact_zeros_everywhere() {
    let curve = desk_curve();
    let rk = risk(0.0, 1.0);
    let o = RiccatiOptions::default();
    let surfaces = vec![
        solve_heston_bates_ab(&heston_bates(), &rk, &curve, None, &o).unwrap(),
        solve_stein_stein_ab(&stein_stein(), &rk, &curve, None, &o).unwrap(),
        solve_hawkes_price_ab(&hawkes(), &rk, &curve, None, &o).unwrap(),
        solve_zhawkes_ab(&zhawkes(), &rk, &curve, None, &o).unwrap(),
        solve_mmpp_ab(&two_level_mmpp(1.0), &rk, &curve, 0.2, 0.0, &o).unwrap(),
        solve_constant_ab(&rk, &moments(&curve), 0.04, 0.0, &o).unwrap(),
    ];
    for s in surfaces {
        assert!(s.a.iter().chain(&s.b).all(|&x| x == 0.0), "{:?}", s.kind);
    }
}

#[test]
fn jumps_raise_the_quadratic_coefficient() {
    let curve = desk_curve();
    let rk = risk(1.0, 1.0);
    let with = heston_bates();
    let mut without = with.clone();
    without.jump_rate = 0.0;
    let g = default_nu_grid(&with, 101).unwrap();
    let o = RiccatiOptions::default();
    let a1 = solve_heston_bates_ab(&with, &rk, &curve, Some(g), &o).unwrap();
    let a0 = solve_heston_bates_ab(&without, &rk, &curve, Some(g), &o).unwrap();
    for (x, y) in a1.a_slice(0).iter().zip(a0.a_slice(0)) {
        assert!(x > y);
    }
}

#[test]
fn hawkes_without_excitation_reduces_to_scalar() {
    let curve = desk_curve();
    let mut model = hawkes();
    model.n = 0.0;
    model.lambda0 = model.lambda_inf;
    let rk = risk(1.0, 1.0);
    let s = solve_hawkes_price_ab(&model, &rk, &curve, None, &Default::default()).unwrap();
    let v = model.lambda_inf * model.jumps.moments().eta_bar_sq;
    let want = scalar_a0(&curve, 1.0, 1.0, v, 0.0);
    for j in 0..s.times.len() {
        let tau = 1.0 - s.times[j];
        let want_j = riccati_closed_form(tau, moments(&curve).i2, v, 0.5 * v);
        assert!((s.a_at(j, 0) - want_j).abs() < 1e-5);
    }
    assert!((s.a_at(0, 0) - want).abs() < 1e-5);
}

#[test]
fn hawkes_a_is_nondecreasing_in_intensity() {
    let s = solve_hawkes_price_ab(&hawkes(), &risk(1.0, 1.0), &desk_curve(), None, &Default::default())
        .unwrap();
    let a0 = s.a_slice(0);
    assert!(a0.windows(2).all(|w| w[1] >= w[0]));
    assert!(a0.iter().all(|&a| a >= 0.0));
}

#[test]
fn hawkes_rejects_initial_intensity_off_grid() {
    let model = hawkes();
    let g = StateGrid1D::new(model.lambda_inf, 11.0, 21).unwrap();
    let err = solve_hawkes_price_ab(&model, &risk(1.0, 1.0), &desk_curve(), Some(g), &Default::default())
        .unwrap_err();
    assert!(matches!(err, Error::OutsideGrid { .. }));
}

#[test]
fn hawkes_shift_policy_reject_reports_the_shift() {
    let o = RiccatiOptions {
        shift_policy: ShiftPolicy::Reject,
        ..Default::default()
    };
    let err = solve_hawkes_price_ab(&hawkes(), &risk(1.0, 1.0), &desk_curve(), None, &o).unwrap_err();
    assert!(err.to_string().contains("lambda + beta n"), "{err}");
    let s = solve_hawkes_price_ab(&hawkes(), &risk(1.0, 1.0), &desk_curve(), None, &Default::default())
        .unwrap();
    assert!(s.diagnostics.shift_clamps > 0);
}

#[test]
fn zhawkes_without_trend_matches_hawkes() {
    let curve = desk_curve();
    let mut zh = zhawkes();
    zh.omega = 0.0;
    zh.xi0 = 0.0;
    let hk = HawkesPrice {
        lambda_inf: zh.lambda_inf,
        beta: zh.kappa,
        n: zh.n_h,
        lambda0: zh.lambda_inf + zh.h0,
        jumps: zh.jumps.clone(),
    };
    let rk = risk(1.0, 1.0);
    let o = RiccatiOptions::default();
    let z = solve_zhawkes_ab(&zh, &rk, &curve, None, &o).unwrap();
    let h = solve_hawkes_price_ab(&hk, &rk, &curve, None, &o).unwrap();
    let (hg, xg) = (z.axes[0], z.axes[1]);
    assert_eq!(hg.n_points, h.axes[0].n_points);
    let centre = xg.nearest(0.0);
    for j in 0..z.times.len() {
        for i in 0..hg.n_points {
            assert!((hg.node(i) + zh.lambda_inf - h.axes[0].node(i)).abs() < 1e-12);
            let za = z.a_at(j, z.state_index(&[i, centre]));
            let zb = z.b_at(j, z.state_index(&[i, centre]));
            assert!((za - h.a_at(j, i)).abs() < 1e-4);
            assert!((zb - h.b_at(j, i)).abs() < 1e-4);
        }
    }
}

/// Centred two-point law `{+u, -d}` whose sign-split second moments agree:
/// `p (1+u)^2 = (1-p) (1-d)^2` with `p = d / (u + d)`. With such a law the
/// system is exactly invariant under `xi -> -xi`.
fn balanced_jumps(d: f64) -> JumpMeasure {
    // Solve d (1+u)^2 = u (1-d)^2 for u > 0 by Newton from u = d.
    let mut u = d;
    for _ in 0..100 {
        let g = d * (1.0 + u).powi(2) - u * (1.0 - d).powi(2);
        let dg = 2.0 * d * (1.0 + u) - (1.0 - d).powi(2);
        u -= g / dg;
    }
    JumpMeasure {
        supports: vec![u, -d],
        probs: vec![d / (u + d), u / (u + d)],
    }
}

#[test]
fn zhawkes_is_mirror_symmetric_for_balanced_jumps() {
    let mut zh = zhawkes();
    zh.jumps = balanced_jumps(0.05);
    let jm = zh.jumps.moments();
    assert!((jm.m2_plus - jm.m2_minus).abs() < 1e-14);
    let s = solve_zhawkes_ab(&zh, &risk(1.0, 1.0), &symmetric_curve(), None, &Default::default())
        .unwrap();
    let (hg, xg) = (s.axes[0], s.axes[1]);
    for i in 0..hg.n_points {
        for j in 0..xg.n_points {
            let a = s.a_at(0, s.state_index(&[i, j]));
            let m = s.a_at(0, s.state_index(&[i, xg.n_points - 1 - j]));
            assert!((a - m).abs() <= 1e-12 * a.abs().max(1e-300), "h={i} xi={j}");
        }
    }
}

fn mirror_asymmetry(eta: f64) -> f64 {
    let mut zh = zhawkes();
    zh.jumps = JumpMeasure::symmetric(eta);
    let s = solve_zhawkes_ab(&zh, &risk(1.0, 1.0), &symmetric_curve(), None, &Default::default())
        .unwrap();
    let (hg, xg) = (s.axes[0], s.axes[1]);
    let q = xg.n_points / 4;
    let mut worst: f64 = 0.0;
    for i in 0..hg.n_points {
        for j in q..xg.n_points - q {
            let a = s.a_at(0, s.state_index(&[i, j]));
            let m = s.a_at(0, s.state_index(&[i, xg.n_points - 1 - j]));
            worst = worst.max((a - m).abs() / a);
        }
    }
    worst
}

#[test]
fn zhawkes_symmetric_jumps_break_mirror_symmetry_at_first_order() {
    // With a sign-symmetric law m2+ - m2- = 2 E[eta; eta > 0], so the
    // xi -> -xi asymmetry is linear in the jump size.
    let a1 = mirror_asymmetry(0.01);
    let a2 = mirror_asymmetry(0.005);
    assert!(a1 > 0.0);
    let ratio = a1 / a2;
    assert!((1.6..2.4).contains(&ratio), "asymmetry {a1} vs {a2}");
}

#[test]
fn mmpp_single_level_matches_tanh() {
    let curve = symmetric_curve();
    let q = Mmpp {
        levels: vec![1.0],
        rate_matrix: vec![vec![0.0]],
        initial_state: 0,
    };
    let sigma = 0.2;
    let (gamma, t_end) = (1.0, 1.0);
    let s = solve_mmpp_ab(&q, &risk(gamma, t_end), &curve, sigma, -0.5 * sigma * sigma, &Default::default())
        .unwrap();
    let i2 = moments(&curve).i2;
    for (j, &t) in s.times.iter().enumerate() {
        let c = 0.5 * gamma * sigma * sigma;
        let exact = (c / (2.0 * i2)).sqrt() * ((2.0 * c * i2).sqrt() * (t_end - t)).tanh();
        assert!((s.a[j] - exact).abs() < 1e-8);
    }
}

#[test]
fn mmpp_without_switching_decouples() {
    let curve = desk_curve();
    let mut q = two_level_mmpp(1.0);
    q.rate_matrix = vec![vec![0.0; 4]; 4];
    let (sigma, mu, gamma) = (0.3, 0.02, 1.5);
    let s = solve_mmpp_ab(&q, &risk(gamma, 1.0), &curve, sigma, mu, &Default::default()).unwrap();
    let coeffs = ammq_core::hamiltonian::QuadraticCoeffs::new(&curve, 0.0).unwrap();
    for r in 0..4 {
        let (l01, l10) = q.intensities(r);
        let m = ammq_core::hamiltonian::demand_moments(&curve, &coeffs, l01, l10);
        let want = riccati_closed_form(1.0, m.i2, 2.0 * mu + sigma * sigma, 0.5 * gamma * sigma * sigma);
        assert!((s.a_at(0, r) - want).abs() < 1e-10);
    }
}

#[test]
fn mmpp_fast_switching_averages_intensities() {
    let curve = desk_curve();
    let q = two_level_mmpp(1e4);
    let pi = q.stationary_distribution();
    let (mut l01, mut l10) = (0.0, 0.0);
    for (r, p) in pi.iter().enumerate() {
        let (a, b) = q.intensities(r);
        l01 += p * a;
        l10 += p * b;
    }
    let coeffs = ammq_core::hamiltonian::QuadraticCoeffs::new(&curve, 0.0).unwrap();
    let m = ammq_core::hamiltonian::demand_moments(&curve, &coeffs, l01, l10);
    let sigma = 0.3;
    let want = riccati_closed_form(1.0, m.i2, sigma * sigma, 0.5 * sigma * sigma);
    let s = solve_mmpp_ab(&q, &risk(1.0, 1.0), &curve, sigma, 0.0, &Default::default()).unwrap();
    for r in 0..4 {
        let rel = (s.a_at(0, r) - want).abs() / want;
        assert!(rel < 0.02, "regime {r}: {rel}");
    }
}

#[test]
fn a_is_nondecreasing_in_gamma() {
    let curve = desk_curve();
    let o = RiccatiOptions::default();
    let g = default_nu_grid(&heston_bates(), 101).unwrap();
    let lo = solve_heston_bates_ab(&heston_bates(), &risk(1.0, 1.0), &curve, Some(g), &o).unwrap();
    let hi = solve_heston_bates_ab(&heston_bates(), &risk(2.0, 1.0), &curve, Some(g), &o).unwrap();
    assert!(lo.a.iter().zip(&hi.a).all(|(l, h)| h >= l));
    let lo = solve_zhawkes_ab(&zhawkes(), &risk(1.0, 1.0), &curve, None, &o).unwrap();
    let hi = solve_zhawkes_ab(&zhawkes(), &risk(2.0, 1.0), &curve, None, &o).unwrap();
    assert!(lo.a.iter().zip(&hi.a).all(|(l, h)| h >= l));
}

#[test]
fn a_does_not_depend_on_whether_b_is_solved() {
    let curve = desk_curve();
    let with_b = RiccatiOptions::default();
    let without_b = RiccatiOptions {
        skip_b: true,
        ..Default::default()
    };
    let rk = risk(1.0, 1.0);
    let x = solve_heston_bates_ab(&heston_bates(), &rk, &curve, None, &with_b).unwrap();
    let y = solve_heston_bates_ab(&heston_bates(), &rk, &curve, None, &without_b).unwrap();
    assert_eq!(x.a, y.a);
    assert!(y.b.iter().all(|&b| b == 0.0));
    let x = solve_zhawkes_ab(&zhawkes(), &rk, &curve, None, &with_b).unwrap();
    let y = solve_zhawkes_ab(&zhawkes(), &rk, &curve, None, &without_b).unwrap();
    assert_eq!(x.a, y.a);
}

#[test]
fn implicit_euler_converges_at_first_order() {
    let curve = desk_curve();
    let rk = risk(1.0, 1.0);
    let g = default_nu_grid(&heston_bates(), 41).unwrap();
    let run = |n: usize| {
        let o = RiccatiOptions {
            time_steps: n,
            richardson: false,
            ..Default::default()
        };
        solve_heston_bates_ab(&heston_bates(), &rk, &curve, Some(g), &o).unwrap().a_slice(0).to_vec()
    };
    let (a1, a2, a4) = (run(50), run(100), run(200));
    let e1: f64 = a1.iter().zip(&a2).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let e2: f64 = a2.iter().zip(&a4).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let order = (e1 / e2).log2();
    assert!(order > 0.9, "order {order}");
}

#[test]
fn terminal_conditions_are_exact() {
    let s = solve_heston_bates_ab(&heston_bates(), &risk(1.0, 1.0), &desk_curve(), None, &Default::default())
        .unwrap();
    let j = s.times.len() - 1;
    assert!(s.a_slice(j).iter().chain(s.b_slice(j)).all(|&x| x == 0.0));
    assert!(s.a.iter().all(|&a| a >= 0.0));
}

#[test]
fn too_large_time_step_fails_the_monotonicity_check() {
    let mut model = heston_bates();
    model.mu = 60.0;
    let o = RiccatiOptions {
        time_steps: 2,
        richardson: false,
        ..Default::default()
    };
    let err = solve_heston_bates_ab(&model, &risk(1.0, 1.0), &desk_curve(), None, &o).unwrap_err();
    assert!(err.is_numerical());
    assert!(err.to_string().contains("row"), "{err}");
}
